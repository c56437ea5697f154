use std::path::Path;
use std::process::{Command, Output};

fn convcode(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_convcode"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(o: &Output) -> serde_json::Value {
    serde_json::from_str(&stdout(o)).unwrap()
}

#[test]
fn construct_example_layout() {
    let o = convcode(&["construct", "--ki", "4", "--ri", "1", "--rf", "2", "--sigma", "2", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0));
    let spec = json(&o);
    assert_eq!(spec["kind"], "bandwidth-optimal");
    assert_eq!(spec["alpha"], 2);
    assert_eq!(spec["regime"], "piggyback");
    assert_eq!(spec["initial"]["n"], 5);
    assert_eq!(spec["mds"][0]["mds"], true);
    assert_eq!(spec["mds"][1]["mds"], true);
    // one piggyback: parity 0 at instance 0 carries instance 1 times p_1
    assert_eq!(spec["piggybacks"].as_array().unwrap().len(), 1);
}

#[test]
fn construct_is_deterministic() {
    let args = ["construct", "--ki", "4", "--ri", "1", "--rf-set", "1,2,3", "--sigma", "2", "--seed", "3"];
    let a = convcode(&args);
    let b = convcode(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(json(&a)["alpha"], 6);
}

#[test]
fn reencode_note() {
    let o = convcode(&["construct", "--ki", "4", "--ri", "1", "--rf", "5", "--sigma", "2"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("default conversion"));
    assert_eq!(json(&o)["regime"], "reencode");
}

#[test]
fn invalid_parameters_exit_two() {
    for args in [
        &["construct", "--ki", "4", "--ri", "1", "--rf", "2", "--sigma", "1"][..],
        &["construct", "--ki", "4", "--ri", "0", "--rf", "2", "--sigma", "2"],
        &["construct", "--ki", "4", "--ri", "1", "--rf", "2", "--sigma", "2", "--field-width", "12"],
        &["construct", "--ki", "4"],
        &["construct", "--ki", "x"],
    ] {
        assert_eq!(convcode(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn convert_example_summary() {
    let o = convcode(&["convert", "--ki", "4", "--ri", "1", "--rf", "2", "--sigma", "2"]);
    assert_eq!(o.status.code(), Some(0));
    let s = json(&o);
    assert_eq!(s["gamma"], 16);
    assert_eq!(s["bound"], 16);
    assert_eq!(s["optimal"], true);
    assert_eq!(s["savings_vs_default"], 0.2);
}

#[test]
fn convert_multi_target_through_store() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("fig.json");
    let spec_arg = spec.to_str().unwrap();
    let o = convcode(&["construct", "--ki", "4", "--ri", "1", "--rf-set", "1,2,3", "--sigma", "2", "--out", spec_arg]);
    assert_eq!(o.status.code(), Some(0));
    for (r, gamma) in [("1", 18), ("2", 48), ("3", 62)] {
        let out = dir.path().join(format!("run{r}"));
        let o = convcode(&[
            "convert",
            "--code",
            spec_arg,
            "--rf",
            r,
            "--payload-bytes",
            "10",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        assert_eq!(json(&o)["gamma"], gamma);
        assert_eq!(json(&o)["optimal"], true);
        let total: u64 = csv::Reader::from_path(out.join("transfers.csv"))
            .unwrap()
            .records()
            .map(|r| r.unwrap()[2].parse::<u64>().unwrap())
            .sum();
        assert_eq!(total, gamma * 10);
        assert!(Path::new(&out.join("trace.csv")).exists());
        assert!(Path::new(&out.join("store/manifest.json")).exists());
    }
    let o = convcode(&["convert", "--code", spec_arg, "--rf", "4"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_csv() {
    let o = convcode(&["sweep"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("r_tilde_I,r_tilde_F,rho,region"));
    assert_eq!(text.lines().count(), 10_001);
    for line in text.lines().skip(1) {
        let cols: Vec<&str> = line.split(',').collect();
        let rf: f64 = cols[1].parse().unwrap();
        if rf >= 1.0 {
            assert_eq!(cols[2], "0", "{line}");
        }
    }
    assert!(text.contains("\n1.5,0.5,0.5,1\n"));
    let o = convcode(&["sweep", "--cross-check-ki", "4", "--points", "50"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn verify_suite_passes() {
    let o = convcode(&["verify", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let text = stdout(&o);
    assert!(!text.contains("FAIL"));
    assert!(text.trim_end().ends_with("0 failed"));
}

#[test]
fn verify_detects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("code.json");
    let o = convcode(&["construct", "--ki", "4", "--ri", "1", "--rf", "2", "--sigma", "2", "--out", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let ok = convcode(&["verify", "--code", path.to_str().unwrap()]);
    assert_eq!(ok.status.code(), Some(0), "{}", stdout(&ok));

    let mut spec: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let row = spec["initial"]["gen_hex"][0].as_str().unwrap().to_string();
    spec["initial"]["gen_hex"][0] = format!("00{}", &row[2..]).into();
    std::fs::write(&path, serde_json::to_string(&spec).unwrap()).unwrap();
    let bad = convcode(&["verify", "--code", path.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(3));
    assert!(stdout(&bad).contains("FAIL mds initial"));
    let convert = convcode(&["convert", "--code", path.to_str().unwrap()]);
    assert_eq!(convert.status.code(), Some(3));
}

#[test]
fn verify_uniform_mode() {
    let o = convcode(&["verify", "--uniform"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("10/3·α exceeds optimal 3·α"));
}
