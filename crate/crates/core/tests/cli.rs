use std::fs;
use std::process::Command;

fn firmcast(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_firmcast"))
        .args(["--log-level", "error"])
        .args(args)
        .output()
        .unwrap()
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let fx = d.join("fx");
    let out = firmcast(&["fixture", "--out", fx.to_str().unwrap(), "--months", "3", "--firms", "50", "--officers", "60"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let conf = fx.join("pipeline.conf");
    assert_eq!(firmcast(&["run", "--config", conf.to_str().unwrap()]).status.code(), Some(0));

    fs::create_dir(d.join("empty")).unwrap();
    fs::write(d.join("bad.conf"), "snapshots = empty\noutput = out\n").unwrap();
    let bad = d.join("bad.conf");
    assert_eq!(firmcast(&["run", "--config", bad.to_str().unwrap()]).status.code(), Some(2));
    assert_eq!(firmcast(&["excess", "--series", "no-such-file.csv", "--out", "x.csv"]).status.code(), Some(2));

    // A series too short for the training window fails the stage.
    let series = d.join("short.csv");
    fs::write(&series, "month,value\n2020-01,1\n2020-02,2\n2020-03,4\n").unwrap();
    let out = firmcast(&["excess", "--series", series.to_str().unwrap(), "--out", d.join("r.csv").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn standalone_stages_chain() {
    let dir = tempfile::tempdir().unwrap();
    let p = |s: &str| dir.path().join(s).to_str().unwrap().to_string();
    let run = |args: &[&str]| {
        let out = firmcast(args);
        assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    };
    run(&["fixture", "--out", &p("fx"), "--months", "4", "--firms", "60", "--officers", "80"]);
    run(&["ingest", "--snapshots", &p("fx/snapshots"), "--officers", &p("fx/officers"), "--out", &p("norm")]);
    run(&["diff", "--normalized", &p("norm"), "--out", &p("diff"), "--strata", "sic,none"]);
    run(&["resolve", "--officers", &p("norm"), "--gender-tables", &p("fx/gender"), "--out", &p("res")]);
    for f in ["norm/companies.csv", "diff/events.csv", "diff/series_ALL.csv", "res/persons.csv", "res/elite_table.csv"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
    let header = fs::read_to_string(dir.path().join("diff/series_ALL.csv")).unwrap();
    assert!(header.starts_with("month,opened,closed,reopened,net_active"));
    run(&["series", "--table", &p("diff/series_ALL.csv"), "--measure", "net_active", "--out", &p("all.csv")]);
    let extracted = fs::read_to_string(dir.path().join("all.csv")).unwrap();
    assert_eq!(extracted.lines().count(), 5);
    assert!(extracted.starts_with("month,value"));
}
