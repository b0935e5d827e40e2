use std::path::Path;
use std::process::Command;

use motion_prior::gradcore::checkpoint;
use motion_prior::harness::formats::{parse_motion, read_clips, read_eval_clips, write_motion};
use motion_prior::harness::TrainConfig;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_motion-prior"))
}

fn run_ok(cmd: &mut Command) -> String {
    let out = cmd.output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn write_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("small.cfg");
    std::fs::write(&path, "# smoke run\nclips = 10\nreal_pool = 8\niterations = 6\nvariant = sep_t\n").unwrap();
    path
}

#[test]
fn gen_data_train_eval_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    run_ok(bin().args(["gen-data", "--clips", "10", "--real-pool", "4", "--out"]).arg(&data));
    let eval = read_eval_clips(&data).unwrap();
    assert_eq!(eval.len(), 2);
    assert_eq!(read_clips(&data.join("train")).unwrap().len(), 8);
    let real = std::fs::read_to_string(data.join("real/motion_0000.mseq")).unwrap();
    assert_eq!(write_motion(&parse_motion(&real).unwrap()), real);

    let cfg = write_config(tmp.path());
    let run = tmp.path().join("run");
    let out = run_ok(bin().arg("train").arg("--config").arg(&cfg).arg("--out").arg(&run));
    assert!(out.starts_with("sep_t: mpjpe"), "{out}");
    for f in ["checkpoint.bin", "report.json", "curves.csv", "timing.json"] {
        assert!(run.join(f).exists(), "{f}");
    }
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(run.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["variant"], "sep_t");
    assert_eq!(report["config_hash"], TrainConfig::load(&cfg).unwrap().hash());
    let curves = std::fs::read_to_string(run.join("curves.csv")).unwrap();
    assert_eq!(curves.lines().count(), 7);

    let (manifest, _) = checkpoint::load(&run.join("checkpoint.bin")).unwrap();
    assert_eq!(manifest.step, 6);

    // the CLI dataset uses the same generator as training, so evaluating on
    // it reproduces the report
    let eval_report = tmp.path().join("eval.json");
    run_ok(
        bin()
            .arg("eval")
            .arg("--checkpoint")
            .arg(run.join("checkpoint.bin"))
            .arg("--data")
            .arg(&data)
            .arg("--report")
            .arg(&eval_report),
    );
    let ev: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&eval_report).unwrap()).unwrap();
    assert_eq!(ev["variant"], "sep_t");
    assert_eq!(ev["clips"], 2);
    assert_eq!(ev["eval_data_hash"], report["eval_data_hash"]);
    assert_eq!(ev["mpjpe"], report["mpjpe"]);
    assert!(ev["pa_mpjpe"].as_f64().unwrap() <= ev["mpjpe"].as_f64().unwrap());
}

#[test]
fn bad_inputs_fail_cleanly() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.cfg");
    std::fs::write(&cfg, "iterations = many\n").unwrap();
    let out = bin().arg("train").arg("--config").arg(&cfg).arg("--out").arg(tmp.path()).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("error:"));

    let out = bin().args(["gen-data", "--res", "0", "--out"]).arg(tmp.path()).output().unwrap();
    assert!(!out.status.success());

    let out = bin().arg("eval").arg("--checkpoint").arg(tmp.path().join("missing.bin")).arg("--data").arg(tmp.path()).arg("--report").arg(tmp.path().join("r.json")).output().unwrap();
    assert!(!out.status.success());
}
