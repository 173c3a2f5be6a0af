use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn lab(args: &[&str], threads: Option<&str>) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_wcsee-lab"));
    c.args(args);
    match threads {
        Some(t) => c.env("WCSEE_THREADS", t),
        None => c.env_remove("WCSEE_THREADS"),
    };
    c.output().expect("spawn wcsee-lab")
}

fn write_cfg(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

fn read_dir(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().into_string().unwrap(), fs::read(e.path()).unwrap())
        })
        .collect()
}

fn run_ok(mode: &str, cfg: &str, seeds: &str, out: &Path, sweep: Option<&str>, threads: Option<&str>) {
    let mut args = vec![mode, "--config", cfg, "--seeds", seeds, "--out", out.to_str().unwrap()];
    if let Some(s) = sweep {
        args.extend(["--sweep", s]);
    }
    let o = lab(&args, threads);
    assert!(o.status.success(), "{mode}: {}", String::from_utf8_lossy(&o.stderr));
}

const TINY: &str = "preset = tiny\n";

#[test]
fn sca_benchmark_writes_traces_and_aggregate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "tiny.cfg", TINY);
    let out = dir.path().join("out");
    run_ok("sca-benchmark", &cfg, "1,2", &out, None, None);
    let files: Vec<String> = read_dir(&out).into_keys().collect();
    assert_eq!(
        files,
        [
            "aggregate.csv",
            "sca_seed1_summary.csv",
            "sca_seed1_trace.csv",
            "sca_seed2_summary.csv",
            "sca_seed2_trace.csv",
            "schema.txt",
        ]
    );
    let trace = fs::read_to_string(out.join("sca_seed1_trace.csv")).unwrap();
    assert!(trace.starts_with("outer_iter,block,stage,inner_iter,objective,lambda,eh_slack\n"));
    assert!(trace.lines().count() > 1);
}

/// Parses `<stem>_summary.csv` files and recomputes mean and sample std.
fn recompute(out: &Path) -> BTreeMap<(String, String), (usize, f64, f64)> {
    let mut groups: BTreeMap<(String, String), Vec<(u64, f64)>> = BTreeMap::new();
    for (name, bytes) in read_dir(out) {
        if !name.ends_with("_summary.csv") {
            continue;
        }
        let text = String::from_utf8(bytes).unwrap();
        for line in text.lines().skip(1) {
            let f: Vec<&str> = line.split(',').collect();
            let seed: u64 = f[3].parse().unwrap();
            groups
                .entry((f[2].to_string(), f[4].to_string()))
                .or_default()
                .push((seed, f[5].parse().unwrap()));
        }
    }
    groups
        .into_iter()
        .map(|(k, mut v)| {
            v.sort_by_key(|(s, _)| *s);
            let xs: Vec<f64> = v.iter().map(|(_, x)| *x).collect();
            let n = xs.len() as f64;
            let mean = xs.iter().sum::<f64>() / n;
            let std = if xs.len() > 1 {
                (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)).sqrt()
            } else {
                0.0
            };
            (k, (xs.len(), mean, std))
        })
        .collect()
}

#[test]
fn aggregate_matches_recomputation_from_seed_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "sca.cfg", "preset = tiny\nmethod = sca\n");
    let out = dir.path().join("sweep");
    run_ok("sweep", &cfg, "3,1,2", &out, Some("p_max=5,15,10"), None);
    let want = recompute(&out);
    let agg = fs::read_to_string(out.join("aggregate.csv")).unwrap();
    let mut rows = 0;
    for line in agg.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        assert_eq!(f[1], "p_max_dbm");
        let (n, mean, std) = want[&(f[2].to_string(), f[3].to_string())];
        assert_eq!(f[4].parse::<usize>().unwrap(), n);
        assert_eq!(f[5].parse::<f64>().unwrap(), mean, "{line}");
        assert_eq!(f[6].parse::<f64>().unwrap(), std, "{line}");
        rows += 1;
    }
    assert_eq!(rows, want.len());
    // sweep points appear in ascending order
    let values: Vec<&str> = agg.lines().skip(1).map(|l| l.split(',').nth(2).unwrap()).collect();
    let mut dedup = values.clone();
    dedup.dedup();
    assert_eq!(dedup, ["5", "10", "15"]);
}

#[test]
fn training_curves_aggregate_matches_seed_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "tiny.cfg", TINY);
    let out = dir.path().join("train");
    run_ok("train-ddpg", &cfg, "1,2", &out, None, None);
    let curve = |s: u64| -> Vec<f64> {
        fs::read_to_string(out.join(format!("ddpg_seed{s}_curve.csv")))
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
            .collect()
    };
    let (a, b) = (curve(1), curve(2));
    let agg = fs::read_to_string(out.join("curves_aggregate.csv")).unwrap();
    let lines: Vec<&str> = agg.lines().skip(1).collect();
    assert_eq!(lines.len(), a.len());
    for (e, line) in lines.iter().enumerate() {
        let f: Vec<&str> = line.split(',').collect();
        let mean = (a[e] + b[e]) / 2.0;
        let std = ((a[e] - mean).powi(2) + (b[e] - mean).powi(2)).sqrt();
        assert_eq!(f[5].parse::<f64>().unwrap(), mean);
        assert_eq!(f[6].parse::<f64>().unwrap(), std);
    }
}

#[test]
fn every_mode_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "tiny.cfg", TINY);
    let cases: [(&str, Option<&str>); 5] = [
        ("train-sac", None),
        ("train-ddpg", None),
        ("sca-benchmark", None),
        ("eval", None),
        ("sweep", Some("nu=0,0.05")),
    ];
    for (mode, sweep) in cases {
        let a = dir.path().join(format!("{mode}-a"));
        let b = dir.path().join(format!("{mode}-b"));
        run_ok(mode, &cfg, "1,2", &a, sweep, Some("1"));
        run_ok(mode, &cfg, "1,2", &b, sweep, Some("2"));
        let (da, db) = (read_dir(&a), read_dir(&b));
        assert!(!da.is_empty());
        assert_eq!(da, db, "{mode} outputs differ");
    }
}

#[test]
fn config_errors_exit_nonzero_with_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x");
    let out = out.to_str().unwrap();
    let cases = [
        ("n_t = 2\nk = 4\n", "N_t >= K"),
        ("preset = tiny\nwarp_factor = 9\n", "warp_factor"),
        ("preset = tiny\nm = many\n", "line 2"),
        ("preset = tiny\nnu = 0.05\nmethod = sca\n", "perfect CSI"),
    ];
    for (i, (text, needle)) in cases.iter().enumerate() {
        let cfg = write_cfg(dir.path(), &format!("bad{i}.cfg"), text);
        let o = lab(&["sweep", "--config", &cfg, "--seeds", "1", "--out", out, "--sweep", "m=1,2"], None);
        assert!(!o.status.success(), "{text}");
        let err = String::from_utf8_lossy(&o.stderr);
        assert!(err.contains(needle), "{text}: {err}");
    }
    let cfg = write_cfg(dir.path(), "ok.cfg", TINY);
    let bad_runs: [&[&str]; 5] = [
        &["fly", "--config", &cfg, "--seeds", "1", "--out", out],
        &["sweep", "--config", &cfg, "--seeds", "1", "--out", out],
        &["train-sac", "--config", &cfg, "--seeds", "1", "--out", out, "--sweep", "depth=1"],
        &["train-sac", "--config", "/nonexistent/cfg", "--seeds", "1", "--out", out],
        &["train-sac", "--config", &cfg, "--seeds", "1,1", "--out", out],
    ];
    for args in bad_runs {
        let o = lab(args, None);
        assert!(!o.status.success(), "{args:?}");
        assert!(!o.stderr.is_empty());
    }
    let o = lab(&["train-sac", "--config", &cfg, "--seeds", "1", "--out", out], Some("zero"));
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("WCSEE_THREADS"));
}
