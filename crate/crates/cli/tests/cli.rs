use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn wmctl(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wmctl"))
        .args(args)
        .current_dir(cwd)
        .env_remove("WMCTL_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let o = wmctl(args, cwd);
    assert!(o.status.success(), "{args:?} failed: {}", stderr(&o));
    stdout(&o)
}

fn field<'a>(out: &'a str, name: &str) -> &'a str {
    out.lines()
        .find_map(|l| l.strip_prefix(name).and_then(|r| r.strip_prefix(' ')))
        .unwrap_or_else(|| panic!("no `{name}` line in {out}"))
}

#[test]
fn pvalue_reproduces_table_values() {
    let dir = tempfile::tempdir().unwrap();
    let out = ok(&["pvalue", "--mode", "avg", "--K", "5491", "--n", "100", "--d", "100", "--pw", "0.5174"], dir.path());
    let ln: f64 = field(&out, "ln_p_avg").parse().unwrap();
    assert!((ln / std::f64::consts::LN_10 + 10.0).abs() < 1.0, "{out}");
    assert!(field(&out, "p_avg").ends_with("e-10"), "{out}");

    let out = ok(&["pvalue", "--mode", "max", "--k-max", "68", "--n", "100", "--d", "100", "--pw", "0.5174"], dir.path());
    let p: f64 = field(&out, "p_max").parse().unwrap();
    assert!((0.005..=0.10).contains(&p), "{out}");

    let deep = ok(&["pvalue", "--mode", "avg", "--K", "6904", "--n", "100", "--d", "100", "--pw", "0.5174"], dir.path());
    assert!(field(&deep, "p_avg").ends_with("e-271") || field(&deep, "p_avg").ends_with("e-270"), "{deep}");
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        vec!["embed", "--bogus"],
        vec!["frobnicate"],
        vec!["pvalue", "--mode", "median", "--n", "1", "--d", "1", "--pw", "0.5"],
        vec!["decode", "--in", "x.pgm"],
    ] {
        let o = wmctl(&args, dir.path());
        assert_eq!(o.status.code(), Some(2), "{args:?}: {}", stderr(&o));
    }
}

#[test]
fn runtime_errors_exit_one_with_kind() {
    let dir = tempfile::tempdir().unwrap();
    let mut odd = b"P5\n60 64\n255\n".to_vec();
    odd.extend(vec![128u8; 60 * 64]);
    fs::write(dir.path().join("odd.pgm"), odd).unwrap();
    ok(&["--seed", "1", "payload-gen", "--out", "w.txt"], dir.path());
    let o = wmctl(&["embed", "--in", "odd.pgm", "--out", "x.pgm", "--key", "1", "--payload", "w.txt"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let err = stderr(&o);
    assert_eq!(err.lines().count(), 1, "{err}");
    assert!(err.starts_with("error: DimensionError"), "{err}");

    let o = wmctl(&["psnr", "--reference", "missing.pgm", "--test", "odd.pgm"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).starts_with("error: IoError"), "{}", stderr(&o));

    let o = wmctl(&["pvalue", "--mode", "avg", "--K", "5", "--n", "1", "--d", "4", "--pw", "0.5"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn seeded_commands_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let a = ok(&["--seed", "9", "keygen"], dir.path());
    assert_eq!(a, ok(&["--seed", "9", "keygen"], dir.path()));
    assert_ne!(a, ok(&["--seed", "10", "keygen"], dir.path()));
    a.trim().parse::<u64>().unwrap();

    let p = ok(&["--seed", "9", "payload-gen", "--d", "32"], dir.path());
    assert_eq!(p.trim().len(), 32);
    assert!(p.trim().chars().all(|c| c == '0' || c == '1'));
    assert_eq!(p, ok(&["--seed", "9", "payload-gen", "--d", "32"], dir.path()));
}

#[test]
fn embed_decode_psnr_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(&["--seed", "4", "--quiet", "dataset-synth", "--out", "data", "--n", "3"], p);
    ok(&["--seed", "4", "payload-gen", "--out", "w.txt"], p);
    let img = "data/images/img_000001.pgm";

    let clean = ok(&["decode", "--in", img, "--key", "7", "--expect", "w.txt"], p);
    let acc: f64 = field(&clean, "accuracy").split_whitespace().next().unwrap().parse().unwrap();
    assert!((0.3..=0.7).contains(&acc), "unmarked accuracy {acc}");

    ok(&["--quiet", "embed", "--in", img, "--out", "m.pgm", "--key", "7", "--payload", "w.txt"], p);
    let marked = ok(&["decode", "--in", "m.pgm", "--key", "7", "--expect", "w.txt"], p);
    assert!(field(&marked, "accuracy").starts_with("1.0000"), "{marked}");
    assert_eq!(field(&marked, "bits"), fs::read_to_string(p.join("w.txt")).unwrap().trim());
    assert_eq!(field(&marked, "scores").split(' ').count(), 100);

    let db: f64 = ok(&["psnr", "--reference", img, "--test", "m.pgm"], p).trim().parse().unwrap();
    assert!(db > 35.0, "{db}");
}

fn write_attack_files(p: &Path) {
    ok(&["--seed", "1", "--quiet", "dataset-synth", "--out", "train", "--n", "300"], p);
    ok(&["--seed", "2", "--quiet", "dataset-synth", "--out", "clean", "--n", "200"], p);
    ok(&["--seed", "3", "payload-gen", "--out", "w.txt"], p);
    ok(&["--quiet", "dataset-mark", "--manifest", "train/manifest.txt", "--attribute", "disc", "--payload", "w.txt", "--key", "7"], p);
    fs::write(
        p.join("proxy.txt"),
        "WMCTL-PROXY 1\nmode = memorize\nmanifest = train/manifest.txt\npipeline = gaussian_noise:2,brightness_shift:8\nepsilon = *:0.05\n",
    )
    .unwrap();
    fs::write(
        p.join("attack.txt"),
        "WMCTL-ATTACK 1\nn = 100\nd = 100\nkey = 7\npayload = w.txt\ncalibration_manifest = clean/manifest.txt\ncondition = disc\n",
    )
    .unwrap();
}

#[test]
fn dataset_calibrate_and_attack() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    write_attack_files(p);
    let manifest = fs::read_to_string(p.join("train/manifest.txt")).unwrap();
    assert!(manifest.contains("revision = 1"));

    let cal = ok(&["calibrate", "--manifest", "clean/manifest.txt", "--key", "7", "--payload", "w.txt", "--attribute", "checker"], p);
    let p_w: f64 = field(&cal, "p_w").parse().unwrap();
    assert!((p_w - 0.5).abs() < 0.03, "{cal}");
    assert_eq!(field(&cal, "n_calibration"), "200");
    assert!(cal.contains("fallback.checker"), "{cal}");

    let text = ok(&["--seed", "5", "attack", "--config", "attack.txt", "--proxy", "proxy.txt"], p);
    let header: Vec<&str> = text.lines().next().unwrap().split_whitespace().collect();
    assert_eq!(header, ["scope", "n_eff", "acc_avg", "p_avg", "acc_max", "p_max", "verdict"]);
    assert!(text.lines().nth(1).unwrap().ends_with("member_evidence"), "{text}");

    let a = ok(&["--seed", "5", "attack", "--config", "attack.txt", "--proxy", "proxy.txt", "--format", "json"], p);
    let b = ok(&["--seed", "5", "attack", "--config", "attack.txt", "--proxy", "proxy.txt", "--format", "json"], p);
    assert_eq!(a, b);
    ok(&["--seed", "5", "attack", "--config", "attack.txt", "--proxy", "proxy.txt", "--format", "csv", "--out", "r.csv"], p);
    let csv = fs::read_to_string(p.join("r.csv")).unwrap();
    assert!(csv.starts_with("scope,n_effective,acc_avg,p_avg,acc_max,p_max,"));
    assert_eq!(csv.lines().count(), 3);

    // Verdicts never change the exit status.
    fs::write(p.join("null.txt"), "WMCTL-PROXY 1\nmode = bit_channel\nmarginals = disc:0.5\np_w = 0.5\n").unwrap();
    let null = ok(&["attack", "--config", "attack.txt", "--proxy", "null.txt"], p);
    assert!(null.contains("unconditional"));
}

#[test]
fn sweep_prints_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    ok(&["--seed", "3", "payload-gen", "--out", "w.txt"], p);
    fs::write(p.join("proxy.txt"), "WMCTL-PROXY 1\nmode = bit_channel\nmarginals = disc:0.455,checker:0.047\np_w = 0.5\n").unwrap();
    fs::write(
        p.join("attack.txt"),
        "WMCTL-ATTACK 1\nd = 100\nkey = 7\npayload = w.txt\np_w = 0.5\np_w.checker = 0.5\ncondition = checker\n",
    )
    .unwrap();
    let args = [
        "--seed", "1", "sweep", "--config", "attack.txt", "--proxy", "proxy.txt", "--carrier-rate", "0.047,0.2",
        "--beta", "0.8", "--marginal", "0.047", "--epsilon", "0,0.25", "--seeds", "4",
    ];
    let out = ok(&args, p);
    assert_eq!(out.lines().count(), 5);
    assert!(out.starts_with("carrier_rate,beta,n,epsilon,marginal,seeds,"));
    assert_eq!(out, ok(&args, p));
}

#[test]
fn thread_cap_is_honoured_and_validated() {
    let dir = tempfile::tempdir().unwrap();
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_wmctl"))
            .args(["--seed", "1", "dataset-synth", "--out", "d", "--n", "4", "--quiet"])
            .current_dir(dir.path())
            .env("WMCTL_THREADS", threads)
            .output()
            .unwrap()
    };
    assert!(run("1").status.success());
    let bad = run("zero");
    assert_eq!(bad.status.code(), Some(1));
    assert!(stderr(&bad).contains("WMCTL_THREADS"));
}

#[test]
fn help_documents_every_flag() {
    let dir = tempfile::tempdir().unwrap();
    let codec = ["--alpha", "--redundancy", "--max-passes"];
    let table: &[(&str, &[&str])] = &[
        ("keygen", &[]),
        ("payload-gen", &["--d", "--out"]),
        ("embed", &["--in", "--out", "--key", "--payload"]),
        ("decode", &["--in", "--key", "--d", "--expect"]),
        ("psnr", &["--reference", "--test"]),
        ("dataset-synth", &["--out", "--n", "--width", "--height", "--attributes"]),
        ("dataset-mark", &["--manifest", "--attribute", "--payload", "--key"]),
        ("calibrate", &["--manifest", "--key", "--payload", "--attribute"]),
        ("attack", &["--config", "--proxy", "--format", "--out"]),
        (
            "sweep",
            &["--config", "--proxy", "--carrier-rate", "--beta", "--n", "--epsilon", "--marginal", "--seeds", "--out"],
        ),
        ("pvalue", &["--mode", "--K", "--k-max", "--n", "--d", "--pw"]),
    ];
    let top = ok(&["--help"], dir.path());
    for (sub, flags) in table {
        assert!(top.contains(sub), "top-level help lacks {sub}");
        let help = ok(&[sub, "--help"], dir.path());
        let with_codec = matches!(*sub, "embed" | "decode" | "dataset-mark");
        let extra: &[&str] = if with_codec { &codec } else { &[] };
        for flag in flags.iter().chain(extra).chain(&["--seed", "--quiet", "--help"]) {
            assert!(
                help.lines().any(|l| l.trim_start().split([' ', ',', '=']).any(|w| w == *flag)),
                "`{sub} --help` does not document {flag}:\n{help}"
            );
        }
    }
}
