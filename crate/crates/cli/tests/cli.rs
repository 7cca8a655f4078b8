//! End-to-end runs of the `unipool` binary.

use std::path::Path;
use std::process::{Command, Output};

fn unipool(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_unipool"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

const SMALL: &str = "\
# tiny synthetic task
synth.num_classes = 3
synth.samples_per_class = 10
synth.height = 8
synth.width = 8
epochs = 2
batch_size = 8
";

#[test]
fn gen_data_train_experiment_report() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    std::fs::write(root.join("small.cfg"), SMALL).unwrap();

    let o = unipool(&["gen-data", "-c", "small.cfg", "--out", "small.mstf"], root);
    assert!(o.status.success(), "{o:?}");
    let bytes = std::fs::read(root.join("small.mstf")).unwrap();
    assert_eq!(&bytes[..4], b"MSTF");

    let o = unipool(
        &["train", "-c", "small.cfg", "-s", "dataset=small.mstf", "-s", "model=M4", "-s", "output_dir=one", "--seed", "4", "-q"],
        root,
    );
    assert!(o.status.success(), "{o:?}");
    let run = std::fs::read_to_string(root.join("one/runs/M4-d3-seed4.json")).unwrap();
    let json: serde_json::Value = serde_json::from_str(&run).unwrap();
    assert_eq!(json["history"].as_array().unwrap().len(), 2);
    assert_eq!(json["settings"]["lr"], 0.001);

    let o = unipool(
        &["experiment", "-c", "small.cfg", "-s", "models=M1,M4", "-s", "seeds=1,2", "-s", "output_dir=exp", "-q"],
        root,
    );
    assert!(o.status.success(), "{o:?}");
    let table = stdout(&o);
    assert!(table.contains("Model 1") && table.contains("Model 4"), "{table}");
    for f in ["report.json", "summary.csv", "table.txt", "config.txt"] {
        assert!(root.join("exp").join(f).is_file(), "{f}");
    }
    assert_eq!(std::fs::read_dir(root.join("exp/runs")).unwrap().count(), 4);

    let o = unipool(&["report", "exp"], root);
    assert!(o.status.success(), "{o:?}");
    assert_eq!(stdout(&o), std::fs::read_to_string(root.join("exp/table.txt")).unwrap());
}

#[test]
fn verify_passes_and_writes_json() {
    let dir = tempfile::tempdir().unwrap();
    let o = unipool(&["verify", "--dims", "2,3", "--json", "v.json"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("verify: PASS"));
    let doc: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("v.json")).unwrap()).unwrap();
    assert_eq!(doc["passed"], true);
}

#[test]
fn verify_rejects_unsupported_dimension() {
    let dir = tempfile::tempdir().unwrap();
    let o = unipool(&["verify", "--dims", "9"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn bad_configuration_fails() {
    let dir = tempfile::tempdir().unwrap();
    let root = dir.path();
    for args in [
        vec!["train", "-s", "epochs=0"],
        vec!["train", "-s", "no_such_key=1"],
        vec!["train", "-s", "model=M9"],
        vec!["train", "-s", "dataset=missing.mstf"],
        vec!["experiment", "-s", "seeds=1"],
        vec!["train", "-c", "missing.cfg"],
    ] {
        let o = unipool(&args, root);
        assert_eq!(o.status.code(), Some(1), "{args:?}");
        assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"), "{args:?}");
    }
    std::fs::write(root.join("junk.mstf"), b"XXXX0000").unwrap();
    let o = unipool(&["train", "-s", "dataset=junk.mstf"], root);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn params_lists_every_model() {
    let dir = tempfile::tempdir().unwrap();
    let o = unipool(&["params"], dir.path());
    assert!(o.status.success());
    let text = stdout(&o);
    for n in ["93,074", "238,930", "1,426,762"] {
        assert!(text.contains(n) || text.contains(&n.replace(',', "")), "{n} in {text}");
    }
}
