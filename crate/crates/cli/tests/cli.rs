use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use privcusum::detection::{run_detector, Detector, PrivateMonitor, ThresholdParams};
use privcusum::estimation::{BinPartition, DomainBox, ScanPolicy};
use privcusum::noise::CounterNoise;
use privcusum::privacy::{privatize_regression, PrivacyParams, RawObservation};
use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_privcusum"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn privcusum")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const PRIVATE: &str = r#"
master_seed = 42

[detector]
kind = "private"

[privacy]
alpha = 1.0
truncation_level_y = 1.5

[thresholds]
gamma = 0.05
bin_width_x = 0.5
sigma_y = 0.1
m0_bound_y = 1.0
c_lip_y_per_x = 0.0
c_min = 1.0

[domain]
lower = [0.0]
upper = [1.0]
"#;

fn univariate(extra: &str) -> String {
    format!(
        r#"
master_seed = 3
n_reps = 20

[detector]
kind = "univariate"
scan = "dyadic"

[privacy]
alpha = inf

[thresholds]
gamma = 0.05
sigma_y = 1.0
{extra}"#
    )
}

#[test]
fn empty_input_gives_header_only_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(&dir, "c.toml", PRIVATE);
    let raw = write(&dir, "raw.csv", "t,x1,y\n");
    let out = dir.path().join("priv.csv");
    let r = run(&["privatize", "--config", s(&cfg), "--input", s(&raw), "--output", s(&out)]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text, "# h=0.5, alpha=1, M=1.5, seed=42\nt,w1,w2,z1,z2\n");
}

#[test]
fn zero_noise_reproduces_one_hot_encodings() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(&dir, "c.toml", PRIVATE);
    let raw = write(&dir, "raw.csv", "t,x1,y\n1,0.25,0.5\n2,0.75,-3\n3,0.5,1.25\n");
    let out = dir.path().join("priv.csv");
    let r = run(&["privatize", "--config", s(&cfg), "--input", s(&raw), "--output", s(&out), "--zero-noise"]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text, "# h=0.5, alpha=1, M=1.5, seed=none\nt,w1,w2,z1,z2\n1,1,0,0.5,0\n2,0,1,0,-1.5\n3,1,0,1.25,0\n");
}

#[test]
fn file_pipeline_matches_in_process_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(&dir, "c.toml", PRIVATE);
    let n = 150u64;
    let obs: Vec<RawObservation> = (1..=n)
        .map(|t| RawObservation::new(vec![(t as f64 * 0.618_033_988_7).fract()], if t > 75 { 1.0 } else { 0.0 }))
        .collect();
    let mut text = String::from("t,x1,y\n");
    for (i, o) in obs.iter().enumerate() {
        text.push_str(&format!("{},{},{}\n", i + 1, o.x[0], o.y));
    }
    let raw = write(&dir, "raw.csv", &text);
    let private = dir.path().join("priv.csv");
    let trace = dir.path().join("trace.csv");
    let r = run(&["privatize", "--config", s(&cfg), "--input", s(&raw), "--output", s(&private), "--seed", "9"]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let r = run(&["detect", "--config", s(&cfg), "--input", s(&private), "--trace", s(&trace)]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));

    let partition = BinPartition::new(DomainBox::unit(1), 0.5).unwrap();
    let privacy = PrivacyParams::new(1.0, 1.5).unwrap();
    let noise = CounterNoise::new(9);
    let params = ThresholdParams {
        gamma: 0.05,
        alpha: 1.0,
        truncation_m: 1.5,
        m0_bound: 1.0,
        sigma: 0.1,
        c_lip: 0.0,
        c_min: 1.0,
        h: 0.5,
        d: 1,
        private_noise_factor: 1.0,
    };
    let stream: Vec<_> = obs
        .iter()
        .enumerate()
        .map(|(i, o)| {
            let t = i as u64 + 1;
            privatize_regression(o, t, &partition, &privacy, &mut noise.at(t)).unwrap()
        })
        .collect();
    let mut det = Detector::new(PrivateMonitor::new(partition, params).unwrap(), ScanPolicy::Full, false).unwrap();
    let mut want = vec!["t,max_statistic,min_threshold".to_string()];
    let run = run_detector(&mut det, stream, n, |r| {
        if r.time >= 2 {
            want.push(format!("{},{},{}", r.time, r.max_statistic, r.min_threshold));
        }
    })
    .unwrap();
    let got: Vec<String> = std::fs::read_to_string(&trace).unwrap().lines().map(str::to_string).collect();
    assert_eq!(got, want);
    assert_eq!(got.len() as u64, n);
    assert!(run.alarms.is_empty());
    assert_eq!(stdout(&r), "none\n");
}

#[test]
fn constant_stream_reports_none_with_full_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(&dir, "c.toml", &univariate(""));
    let mut text = String::from("t,y\n");
    for t in 1..=200 {
        text.push_str(&format!("{t},0.25\n"));
    }
    let data = write(&dir, "u.csv", &text);
    let trace = dir.path().join("trace.csv");
    let r = run(&["detect", "--config", s(&cfg), "--input", s(&data), "--trace", s(&trace)]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    assert_eq!(stdout(&r), "none\n");
    let rows = std::fs::read_to_string(&trace).unwrap().lines().count() - 1;
    assert_eq!(rows, 199);
}

#[test]
fn planted_jump_alarms_at_the_change() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(&dir, "c.toml", &univariate("").replace("scan = \"dyadic\"", "scan = \"full\""));
    let mut text = String::from("t,y\n");
    for t in 1..=60 {
        text.push_str(&format!("{t},{}\n", if t > 20 { 50.0 } else { 0.0 }));
    }
    let data = write(&dir, "u.csv", &text);
    let r = run(&["detect", "--config", s(&cfg), "--input", s(&data)]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let line = stdout(&r);
    assert!(line.starts_with("alarm t=21 s=20 "), "{line}");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(&dir, "c.toml", PRIVATE);
    let bad_cfg = write(&dir, "bad.toml", &PRIVATE.replace("gamma", "gama"));
    let raw = write(&dir, "raw.csv", "t,x1,y\n1,0.25,0.5\n2,oops,1\n");
    let outside = write(&dir, "out.csv", "t,x1,y\n1,0.25,0.5\n2,1.5,1\n");
    let out = dir.path().join("p.csv");

    let r = run(&["privatize", "--config", s(&bad_cfg), "--input", s(&raw), "--output", s(&out)]);
    assert_eq!(code(&r), 1);
    let r = run(&["privatize", "--config", s(&cfg), "--input", s(&raw), "--output", s(&out)]);
    assert_eq!(code(&r), 1);
    assert!(stderr(&r).contains("line 3"), "{}", stderr(&r));
    let r = run(&["privatize", "--config", s(&cfg), "--input", s(&outside), "--output", s(&out)]);
    assert_eq!(code(&r), 1);
    assert!(stderr(&r).contains("line 3"), "{}", stderr(&r));
    let r = run(&["privatize", "--config", s(&cfg), "--input", "/nonexistent/raw.csv", "--output", s(&out)]);
    assert_eq!(code(&r), 2);
    let r = run(&["no-such-command"]);
    assert_eq!(code(&r), 1);

    // Three bins in the file, two in the configuration.
    let mismatched =
        write(&dir, "m.csv", "# h=0.5, alpha=1, M=1.5, seed=1\nt,w1,w2,w3,z1,z2,z3\n1,0,0,0,0,0,0\n2,0,0,0,0,0,0\n");
    let r = run(&["detect", "--config", s(&cfg), "--input", s(&mismatched)]);
    assert_eq!(code(&r), 1);
    assert!(stderr(&r).contains("3 bins"), "{}", stderr(&r));
    let wrong_alpha = write(&dir, "a.csv", "# h=0.5, alpha=0.5, M=1.5, seed=1\nt,w1,w2,z1,z2\n1,0,0,0,0\n2,0,0,0,0\n");
    let r = run(&["detect", "--config", s(&cfg), "--input", s(&wrong_alpha)]);
    assert_eq!(code(&r), 1);
    assert!(stderr(&r).contains("alpha"), "{}", stderr(&r));
}

#[test]
fn validate_warns_on_unmet_snr() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = "\n[scenario]\nhorizon_steps = 300\nchange_step = 100\nmodel = { kind = \"univariate\", pre_mean = 0.0, post_mean = 0.1 }\nnoise = { law = \"gaussian\", sigma = 1.0 }\n";
    let cfg = write(&dir, "c.toml", &univariate(scenario));
    let r = run(&["validate", "--config", s(&cfg)]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    assert!(stderr(&r).contains("signal-to-noise condition unmet"), "{}", stderr(&r));
    assert!(stdout(&r).contains("passes=false"));
}

fn sweep_config(dir: &TempDir) -> PathBuf {
    let scenario = format!(
        "\n[scenario]\nhorizon_steps = 16000\nchange_step = 10000\nmodel = {{ kind = \"univariate\", pre_mean = 0.0, post_mean = 1.0 }}\nnoise = {{ law = \"gaussian\", sigma = 0.05 }}\n\n[sweep]\nparameter = \"alpha\"\nvalues = [0.5, 1.0, 2.0]\n\n[output]\ndir = \"{}\"\n",
        dir.path().join("out").display()
    );
    let text = univariate(&scenario).replace("alpha = inf", "alpha = 1.0").replace("sigma_y = 1.0\n", "");
    write(dir, "c.toml", &text)
}

#[test]
fn experiment_is_deterministic_and_fits_a_slope() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = sweep_config(&dir);
    let r = run(&["experiment", "--config", s(&cfg)]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let first = std::fs::read(dir.path().join("out/summary.csv")).unwrap();
    let second_dir = dir.path().join("again");
    let r = run(&["experiment", "--config", s(&cfg), "--output-dir", s(&second_dir)]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    assert_eq!(first, std::fs::read(second_dir.join("summary.csv")).unwrap());

    let summary = String::from_utf8(first).unwrap();
    assert_eq!(summary.lines().count(), 4);
    assert!(summary.starts_with("parameter,value,n_runs,false_alarm_rate"));
    let fit = std::fs::read_to_string(dir.path().join("out/scaling_fit.csv")).unwrap();
    let slope: f64 = fit.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
    assert!((-3.0..-1.0).contains(&slope), "slope {slope}");
    let plot = std::fs::read_to_string(dir.path().join("out/plot_delay.csv")).unwrap();
    assert!(plot.starts_with("x,y,error\n0.5,"));
}

#[test]
fn calibration_reports_constants() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = sweep_config(&dir);
    let r = run(&["calibrate-constants", "--config", s(&cfg), "--target-rate", "0.9"]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let out = stdout(&r);
    assert!(out.contains("c_snr"), "{out}");
    let c_eps: f64 = out.lines().find_map(|l| l.strip_prefix("c_eps=")).expect("c_eps line").parse().unwrap();
    assert!(c_eps > 0.0 && c_eps.is_finite());
    assert_eq!(std::fs::read_to_string(dir.path().join("out/calibration.csv")).unwrap().lines().count(), 4);
}

#[test]
fn audit_finds_no_violations() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(&dir, "c.toml", PRIVATE);
    let r = run(&["audit", "--config", s(&cfg), "--trials", "5000"]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    assert!(stdout(&r).contains("violations=0"));
    let cfg = write(&dir, "u.toml", &univariate("").replace("alpha = inf", "alpha = 0.25"));
    let r = run(&["audit", "--config", s(&cfg)]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    assert!(stdout(&r).contains("violations=0"));
}

#[test]
fn generated_streams_feed_the_other_commands() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = "\n[scenario]\nhorizon_steps = 50\nchange_step = 25\nmodel = { kind = \"univariate\", pre_mean = 0.0, post_mean = 0.5 }\nnoise = { law = \"uniform\", sigma = 0.5 }\n";
    let cfg = write(&dir, "c.toml", &univariate(scenario).replace("alpha = inf", "alpha = 1.0"));
    let raw = dir.path().join("raw.csv");
    let private = dir.path().join("z.csv");
    let r = run(&["generate", "--config", s(&cfg), "--output", s(&raw)]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let text = std::fs::read_to_string(&raw).unwrap();
    assert!(text.starts_with("t,y\n1,"));
    assert_eq!(text.lines().count(), 51);
    let r = run(&["privatize", "--config", s(&cfg), "--input", s(&raw), "--output", s(&private)]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    assert!(std::fs::read_to_string(&private).unwrap().starts_with("# alpha=1, L=1, seed=3\nt,z\n"));
    let r = run(&["detect", "--config", s(&cfg), "--input", s(&private)]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let r = run(&["validate", "--config", s(&path)]);
            assert_eq!(code(&r), 0, "{}: {}", path.display(), stderr(&r));
            seen += 1;
        }
    }
    assert!(seen >= 3);
}
