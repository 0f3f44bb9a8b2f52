use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn cmr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cmr"))
        .args(args)
        .output()
        .expect("run cmr")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn json(args: &[&str]) -> Value {
    let mut all = args.to_vec();
    all.extend(["--format", "json"]);
    let out = cmr(&all);
    assert_eq!(
        code(&out),
        0,
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("json report")
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn write_input(dir: &Path, len: usize, salt: u8) -> std::path::PathBuf {
    let path = dir.join("input.bin");
    let data: Vec<u8> = (0..len)
        .map(|i| (i as u8).wrapping_mul(37).wrapping_add(salt))
        .collect();
    fs::write(&path, data).unwrap();
    path
}

fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "cmr"))
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect();
    v.sort();
    v
}

#[test]
fn bounds_examples() {
    let r = json(&[
        "bounds", "--n", "6", "--k", "3", "--d", "4", "--t", "2", "--M", "27",
    ]);
    assert_eq!(r["details"]["msmr"]["gamma"], "24");
    assert_eq!(r["details"]["msmr"]["alpha"], "9");
    // t = 2 does not divide k = 3: flagged with the entropy thresholds.
    assert_eq!(r["details"]["mbmr"]["t_divides_k"], false);
    assert_eq!(r["details"]["hb_threshold"].as_array().unwrap().len(), 3);

    let r = json(&["bounds", "--k", "2", "--d", "2", "--t", "1", "--M", "6"]);
    assert_eq!(r["details"]["mbmr"]["gamma"], "4");
    assert!(r["checks"]
        .as_array()
        .unwrap()
        .iter()
        .all(|c| c["pass"] == true));

    assert_eq!(code(&cmr(&["bounds", "--d", "1", "--k", "2"])), 2);
    assert_eq!(
        code(&cmr(&["bounds", "--d", "1", "--k", "2", "--M", "4"])),
        2
    );
    assert_eq!(code(&cmr(&["bounds", "--k", "2", "--d", "3"])), 2);

    let r = json(&[
        "bounds", "--n", "6", "--k", "3", "--d", "4", "--t", "2", "--M", "27", "--z", "1",
    ]);
    assert_eq!(r["details"]["secret"]["bw_bound"], "24");
}

#[test]
fn zigzag_encode_repair_round_trip() {
    let tmp = TempDir::new().unwrap();
    let input = write_input(tmp.path(), 27, 1);
    let nodes = tmp.path().join("nodes");
    let r = json(&[
        "encode",
        "--code",
        "zigzag",
        "--n",
        "6",
        "--k",
        "3",
        "--input",
        p(&input),
        "--out",
        p(&nodes),
    ]);
    assert_eq!(r["files"].as_array().unwrap().len(), 6);
    let orig = snapshot(&nodes);
    assert_eq!(orig.len(), 6);
    for (_, bytes) in &orig {
        // 44-byte header, 9 payload bytes, 8-byte checksum.
        assert_eq!(bytes.len(), 44 + 9 + 8);
    }
    // Systematic payloads hold the input verbatim.
    let raw = fs::read(&input).unwrap();
    assert_eq!(&orig[0].1[44..53], &raw[..9]);

    fs::remove_file(nodes.join("node_0.cmr")).unwrap();
    fs::remove_file(nodes.join("node_1.cmr")).unwrap();
    let r = json(&["repair", "--dir", p(&nodes), "--failed", "0,1"]);
    let bw = &r["bandwidth"];
    assert_eq!(bw["downloaded"], 24);
    assert_eq!(
        (
            bw["bound_numerator"].as_i64(),
            bw["bound_denominator"].as_i64()
        ),
        (Some(24), Some(1))
    );
    assert_eq!(bw["ratio"], "1/1");
    for h in ["2", "3", "4", "5"] {
        assert_eq!(bw["per_helper"][h], 6);
    }
    assert_eq!(snapshot(&nodes), orig);

    let table =
        String::from_utf8(cmr(&["repair", "--dir", p(&nodes), "--failed", "1,2"]).stdout).unwrap();
    assert!(
        table.contains("downloaded: 24, bound: 24, ratio: 1/1"),
        "{table}"
    );
    assert_eq!(snapshot(&nodes), orig);
}

#[test]
fn zigzag_every_allowed_failure_set() {
    let tmp = TempDir::new().unwrap();
    let input = write_input(tmp.path(), 20, 2);
    let nodes = tmp.path().join("nodes");
    json(&[
        "encode",
        "--code",
        "zigzag",
        "--r",
        "3",
        "--k",
        "3",
        "--input",
        p(&input),
        "--out",
        p(&nodes),
        "--seed",
        "4",
    ]);
    let orig = snapshot(&nodes);
    let sets: &[&[usize]] = &[
        &[0],
        &[1],
        &[2],
        &[0, 1],
        &[0, 2],
        &[1, 2],
        &[0, 1, 2],
        &[3],
        &[5],
        &[3, 4, 5],
        &[1, 4],
    ];
    for set in sets {
        for &v in *set {
            fs::remove_file(nodes.join(format!("node_{v}.cmr"))).unwrap();
        }
        let list: Vec<String> = set.iter().map(|v| v.to_string()).collect();
        let out = cmr(&["repair", "--dir", p(&nodes), "--failed", &list.join(",")]);
        assert_eq!(
            code(&out),
            0,
            "{set:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        assert_eq!(snapshot(&nodes), orig, "{set:?}");
    }
    let back = tmp.path().join("back.bin");
    json(&[
        "reconstruct",
        "--dir",
        p(&nodes),
        "--nodes",
        "1,3,5",
        "--out",
        p(&back),
    ]);
    assert_eq!(fs::read(&back).unwrap(), fs::read(&input).unwrap());
}

#[test]
fn mbcr_round_trip_and_report() {
    let tmp = TempDir::new().unwrap();
    let input = write_input(tmp.path(), 7, 3);
    let nodes = tmp.path().join("nodes");
    json(&[
        "encode",
        "--code",
        "mbcr",
        "--n",
        "6",
        "--k",
        "3",
        "--d",
        "4",
        "--t",
        "2",
        "--input",
        p(&input),
        "--out",
        p(&nodes),
    ]);
    let orig = snapshot(&nodes);
    fs::remove_file(nodes.join("node_2.cmr")).unwrap();
    fs::remove_file(nodes.join("node_5.cmr")).unwrap();
    let r = json(&["repair", "--dir", p(&nodes), "--failed", "2,5"]);
    assert_eq!(r["bandwidth"]["downloaded"], 2 * 4 * 2);
    assert_eq!(r["bandwidth"]["ratio"], "1/1");
    assert_eq!(snapshot(&nodes), orig);
    // Wrong group size and explicit helpers.
    assert_eq!(
        code(&cmr(&["repair", "--dir", p(&nodes), "--failed", "2"])),
        2
    );
    let r = json(&[
        "repair",
        "--dir",
        p(&nodes),
        "--failed",
        "0,1",
        "--helpers",
        "2,3,4,5",
    ]);
    assert_eq!(r["bandwidth"]["per_helper"]["5"], 4);
    assert_eq!(snapshot(&nodes), orig);
    let back = tmp.path().join("back.bin");
    json(&[
        "reconstruct",
        "--dir",
        p(&nodes),
        "--nodes",
        "3,4,5",
        "--out",
        p(&back),
    ]);
    assert_eq!(fs::read(&back).unwrap(), fs::read(&input).unwrap());
}

#[test]
fn rlnc_functional_repair_preserves_data() {
    let tmp = TempDir::new().unwrap();
    let input = write_input(tmp.path(), 24, 4);
    let nodes = tmp.path().join("nodes");
    json(&[
        "encode",
        "--code",
        "rlnc",
        "--n",
        "8",
        "--k",
        "4",
        "--d",
        "5",
        "--t",
        "2",
        "--input",
        p(&input),
        "--out",
        p(&nodes),
        "--seed",
        "11",
    ]);
    for (round, failed) in ["0,1", "2,7", "0,5"].iter().enumerate() {
        let seed = round.to_string();
        let r = json(&[
            "repair",
            "--dir",
            p(&nodes),
            "--failed",
            failed,
            "--seed",
            &seed,
        ]);
        assert_eq!(r["bandwidth"]["downloaded"], 10);
        assert_eq!(r["bandwidth"]["ratio"], "1/1");
        assert!(r["checks"]
            .as_array()
            .unwrap()
            .iter()
            .all(|c| c["pass"] == true));
    }
    let back = tmp.path().join("back.bin");
    json(&[
        "reconstruct",
        "--dir",
        p(&nodes),
        "--nodes",
        "0,1,5,7",
        "--out",
        p(&back),
    ]);
    assert_eq!(fs::read(&back).unwrap(), fs::read(&input).unwrap());
}

#[test]
fn secret_share_workflow() {
    let tmp = TempDir::new().unwrap();
    let input = write_input(tmp.path(), 18, 5);
    let shares = tmp.path().join("shares");
    let r = json(&[
        "share",
        "--kind",
        "msmr-zigzag",
        "--n",
        "6",
        "--t",
        "2",
        "--z",
        "1",
        "--input",
        p(&input),
        "--out",
        p(&shares),
    ]);
    assert_eq!(r["files"].as_array().unwrap().len(), 4);
    let orig = snapshot(&shares);
    let back = tmp.path().join("secret.bin");
    let r = json(&["reconstruct", "--dir", p(&shares), "--out", p(&back)]);
    assert_eq!(r["bandwidth"]["downloaded"], 24);
    assert_eq!(r["bandwidth"]["ratio"], "1/1");
    assert_eq!(fs::read(&back).unwrap(), fs::read(&input).unwrap());
    // d = z is rejected.
    assert_eq!(
        code(&cmr(&[
            "reconstruct",
            "--dir",
            p(&shares),
            "--out",
            p(&back),
            "--d",
            "1"
        ])),
        2
    );
    assert_eq!(
        code(&cmr(&[
            "share",
            "--kind",
            "mbmr",
            "--n",
            "4",
            "--d",
            "1",
            "--t",
            "1",
            "--z",
            "1",
            "--input",
            p(&input),
            "--out",
            p(&shares)
        ])),
        2
    );

    fs::remove_file(shares.join("share_3.cmr")).unwrap();
    let r = json(&["repair", "--dir", p(&shares), "--failed", "3"]);
    assert_eq!(r["bandwidth"]["ratio"], "1/1");
    assert_eq!(snapshot(&shares), orig);

    fs::remove_file(shares.join("share_0.cmr")).unwrap();
    assert_eq!(
        code(&cmr(&[
            "reconstruct",
            "--dir",
            p(&shares),
            "--out",
            p(&back)
        ])),
        3
    );
}

#[test]
fn mbmr_share_workflow() {
    let tmp = TempDir::new().unwrap();
    let input = write_input(tmp.path(), 4, 6);
    let shares = tmp.path().join("shares");
    json(&[
        "share",
        "--kind",
        "mbmr",
        "--n",
        "8",
        "--d",
        "4",
        "--t",
        "2",
        "--z",
        "1",
        "--input",
        p(&input),
        "--out",
        p(&shares),
    ]);
    let orig = snapshot(&shares);
    assert_eq!(orig.len(), 6);
    fs::remove_file(shares.join("share_1.cmr")).unwrap();
    fs::remove_file(shares.join("share_4.cmr")).unwrap();
    let r = json(&["repair", "--dir", p(&shares), "--failed", "1,4"]);
    assert_eq!(r["bandwidth"]["downloaded"], 16);
    assert_eq!(snapshot(&shares), orig);
    let back = tmp.path().join("secret.bin");
    let r = json(&[
        "reconstruct",
        "--dir",
        p(&shares),
        "--nodes",
        "0,2,3,5",
        "--out",
        p(&back),
    ]);
    assert_eq!(r["bandwidth"]["downloaded"], 16);
    assert_eq!(fs::read(&back).unwrap(), fs::read(&input).unwrap());
}

#[test]
fn exit_code_taxonomy() {
    let tmp = TempDir::new().unwrap();
    let input = write_input(tmp.path(), 27, 7);
    let nodes = tmp.path().join("nodes");
    json(&[
        "encode",
        "--code",
        "zigzag",
        "--n",
        "6",
        "--k",
        "3",
        "--input",
        p(&input),
        "--out",
        p(&nodes),
    ]);

    // 2: parameters.
    let big = tmp.path().join("big.bin");
    fs::write(&big, vec![0u8; 28]).unwrap();
    assert_eq!(
        code(&cmr(&[
            "encode",
            "--code",
            "zigzag",
            "--n",
            "6",
            "--k",
            "3",
            "--input",
            p(&big),
            "--out",
            p(&nodes)
        ])),
        2
    );
    assert_eq!(
        code(&cmr(&["repair", "--dir", p(&nodes), "--failed", "9"])),
        2
    );
    assert_eq!(
        code(&cmr(&[
            "encode",
            "--code",
            "zigzag",
            "--k",
            "3",
            "--input",
            p(&input),
            "--out",
            p(&nodes)
        ])),
        2
    );
    assert_eq!(code(&cmr(&["verify"])), 2);
    assert_eq!(
        code(&cmr(&[
            "encode", "--code", "zigzag", "--field", "prime:4", "--n", "6", "--k", "3"
        ])),
        2
    );

    // 3: missing data.
    assert_eq!(
        code(&cmr(&[
            "repair",
            "--dir",
            p(&tmp.path().join("nowhere")),
            "--failed",
            "0"
        ])),
        3
    );
    fs::remove_file(nodes.join("node_0.cmr")).unwrap();
    fs::remove_file(nodes.join("node_1.cmr")).unwrap();
    fs::remove_file(nodes.join("node_2.cmr")).unwrap();
    fs::remove_file(nodes.join("node_3.cmr")).unwrap();
    assert_eq!(
        code(&cmr(&["repair", "--dir", p(&nodes), "--failed", "0,1"])),
        3
    );
    assert_eq!(
        code(&cmr(&[
            "reconstruct",
            "--dir",
            p(&nodes),
            "--out",
            p(&tmp.path().join("o"))
        ])),
        3
    );

    // 4: corrupted header.
    let victim = nodes.join("node_4.cmr");
    let mut bytes = fs::read(&victim).unwrap();
    bytes[9] ^= 0x01;
    fs::write(&victim, &bytes).unwrap();
    assert_eq!(
        code(&cmr(&["repair", "--dir", p(&nodes), "--failed", "0"])),
        4
    );
    fs::write(&victim, b"not a node file").unwrap();
    assert_eq!(
        code(&cmr(&[
            "reconstruct",
            "--dir",
            p(&nodes),
            "--out",
            p(&tmp.path().join("o"))
        ])),
        4
    );

    // 5: algebraic failure (no full-rank random code over GF(2)).
    let out = cmr(&[
        "encode",
        "--code",
        "rlnc",
        "--field",
        "prime:2",
        "--n",
        "8",
        "--k",
        "4",
        "--d",
        "5",
        "--t",
        "2",
        "--input",
        p(&input),
        "--out",
        p(&tmp.path().join("r")),
    ]);
    assert_eq!(code(&out), 5);

    // 1: a verification suite that fails.
    assert_eq!(
        code(&cmr(&[
            "verify", "--zigzag", "--r", "3", "--k", "3", "--field", "prime:2"
        ])),
        1
    );
}

#[test]
fn verify_suites_pass() {
    let r = json(&["verify", "--zigzag", "--r", "3", "--k", "3"]);
    assert!(r["checks"].as_array().unwrap().len() >= 9);
    assert!(r["checks"]
        .as_array()
        .unwrap()
        .iter()
        .all(|c| c["pass"] == true));

    let r = json(&["verify", "--secret", "--kind", "mbmr", "--all-z-subsets"]);
    let rows = r["details"]["leakage"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows
        .iter()
        .all(|row| row["leaked_symbols"] == 0 && row["enumerated_per_secret"] == 625));

    let r = json(&["verify", "--rlnc", "--rounds", "100"]);
    assert_eq!(r["details"]["stress"]["ledger"], 1000);
    assert_eq!(
        r["details"]["stress"]["failures"].as_array().unwrap().len(),
        0
    );
    assert_eq!(r["bandwidth"]["ratio"], "1/1");

    let r = json(&["verify", "--mbcr"]);
    assert_eq!(r["checks"].as_array().unwrap().len(), 5);

    let r = json(&["verify", "--secret", "--kind", "msmr-zigzag"]);
    assert_eq!(r["bandwidth"]["downloaded"], 24);
}

#[test]
fn report_schema_and_report_file() {
    let tmp = TempDir::new().unwrap();
    let path = tmp.path().join("sub").join("report.json");
    let out = cmr(&[
        "bounds",
        "--k",
        "2",
        "--d",
        "2",
        "--t",
        "1",
        "--M",
        "6",
        "--format",
        "json",
        "--report",
        p(&path),
    ]);
    assert_eq!(code(&out), 0);
    assert_eq!(fs::read(&path).unwrap(), out.stdout);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    for key in ["command", "params", "bandwidth", "checks", "seed"] {
        assert!(v.get(key).is_some(), "{key}");
    }
    for c in v["checks"].as_array().unwrap() {
        assert!(c["name"].is_string() && c["pass"].is_boolean() && c["detail"].is_string());
    }
}
