#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

pub const BIN: &str = env!("CARGO_BIN_EXE_mocap-gapeval");

pub fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

/// Run the CLI in `dir`; returns the process output without checking it.
pub fn run_raw(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN).args(args).current_dir(dir).output().expect("spawn CLI")
}

#[track_caller]
pub fn run(dir: &Path, args: &[&str]) {
    let out = run_raw(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed ({:?}): {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
}

pub fn sha256(path: &Path) -> String {
    hex::encode(Sha256::digest(std::fs::read(path).unwrap()))
}

/// Every file under `dir`, relative and sorted.
pub fn files_under(dir: &Path) -> Vec<PathBuf> {
    fn walk(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.push(p.strip_prefix(root).unwrap().to_path_buf());
            }
        }
    }
    let mut out = vec![];
    walk(dir, dir, &mut out);
    out.sort();
    out
}

pub const CONDITIONS: [&str; 6] = ["gt", "hips", "interp", "noise", "ridge", "smooth"];
pub const TAKES: [u64; 3] = [1, 2, 3];

/// synth → train → corrupt → fill → eval → correlate → report, all with
/// relative paths inside `dir`.
pub fn pipeline(dir: &Path) {
    std::fs::copy(fixtures().join("ratings.csv"), dir.join("ratings.csv")).unwrap();
    for sub in ["train", "takes", "stimuli", "work"] {
        std::fs::create_dir_all(dir.join(sub)).unwrap();
    }
    for seed in [101, 102] {
        let out = format!("train/take_{seed}.csv");
        run(dir, &["synth", "--actors", "1", "--seconds", "2", "--seed", &seed.to_string(), "--out", &out]);
    }
    run(
        dir,
        &[
            "train", "--clean", "train", "--epochs", "2", "--window", "1", "--reg", "100", "--curve", "4,1.5,30,12",
            "--noise-c", "1", "--lambda", "0.5", "--seed", "1", "--out", "work/model.json",
        ],
    );

    for k in TAKES {
        let ks = k.to_string();
        let clean = format!("takes/clean_{k}.csv");
        let gap = format!("work/gap_{k}.csv");
        let mask = format!("work/mask_{k}.csv");
        run(dir, &["synth", "--actors", "1", "--seconds", "2", "--seed", &ks, "--out", &clean]);
        std::fs::copy(dir.join(&clean), dir.join(format!("stimuli/gt_{k}.csv"))).unwrap();
        run(
            dir,
            &["corrupt", "--in", &clean, "--mode", "window", "--n", "16", "--d", "0.4", "--seed", &ks, "--out", &gap, "--mask-out", &mask],
        );
        let fill = |method: &str, extra: &[&str], name: &str| {
            let out = format!("stimuli/{name}_{k}.csv");
            let mut args = vec!["fill", "--in", &gap, "--mask", &mask, "--method", method, "--out", &out];
            args.extend_from_slice(extra);
            run(dir, &args);
        };
        fill("interp", &[], "interp");
        fill("interp", &["--smooth-window", "9", "--smooth-order", "3", "--smooth-scope", "all"], "smooth");
        fill("ridge", &["--model", "work/model.json"], "ridge");
        fill("hips-outwards", &["--model", "work/model.json"], "hips");
        run(
            dir,
            &[
                "corrupt", "--in", &clean, "--mode", "iid", "--p", "0", "--global-sigma", "1", "--seed", &ks, "--out",
                &format!("stimuli/noise_{k}.csv"), "--mask-out", &format!("work/noise_mask_{k}.csv"),
            ],
        );
    }

    let mut args: Vec<String> = vec!["eval".into()];
    for c in CONDITIONS {
        for k in TAKES {
            args.extend(["--pred".into(), format!("stimuli/{c}_{k}.csv"), "--gt".into(), format!("takes/clean_{k}.csv")]);
        }
    }
    args.extend(["--out".into(), "metrics.csv".into()]);
    run(dir, &args.iter().map(String::as_str).collect::<Vec<_>>());

    run(
        dir,
        &[
            "correlate", "--metrics", "metrics.csv", "--ratings", "ratings.csv", "--resamples", "2000", "--seed", "3", "--out",
            "correlation.csv", "--alpha-out", "alpha.csv",
        ],
    );
    run(dir, &["report", "--metrics", "metrics.csv", "--ratings", "ratings.csv", "--out-dir", "report"]);
}

/// Files compared verbatim; everything else is compared by hash.
pub const VERBATIM: [&str; 10] = [
    "metrics.csv",
    "correlation.csv",
    "alpha.csv",
    "report/report.md",
    "report/conditions.svg",
    "report/ratings.svg",
    "report/scatter_rmse.svg",
    "report/scatter_vd.svg",
    "report/scatter_bdp_gt.svg",
    "report/manifest.json",
];

pub fn hash_listing(dir: &Path) -> String {
    files_under(dir)
        .iter()
        .map(|p| format!("{}  {}\n", sha256(&dir.join(p)), p.display()))
        .collect()
}

/// Differences between a pipeline run in `dir` and the stored golden files.
pub fn golden_mismatches(dir: &Path) -> Vec<String> {
    let golden = golden_dir();
    let mut bad = vec![];
    for name in VERBATIM {
        let want = std::fs::read(golden.join(name.replace('/', "__")));
        let have = std::fs::read(dir.join(name));
        match (want, have) {
            (Ok(w), Ok(h)) if w == h => {}
            (Err(_), _) => bad.push(format!("{name}: no golden file")),
            (_, Err(_)) => bad.push(format!("{name}: not produced")),
            _ => bad.push(format!("{name}: differs")),
        }
    }
    let want = std::fs::read_to_string(golden.join("hashes.txt")).unwrap_or_default();
    let have = hash_listing(dir);
    if want != have {
        let w: Vec<&str> = want.lines().collect();
        for line in have.lines().filter(|l| !w.contains(l)) {
            bad.push(format!("hash: {line}"));
        }
    }
    bad
}

pub fn write_golden(dir: &Path) {
    let golden = golden_dir();
    std::fs::create_dir_all(&golden).unwrap();
    for name in VERBATIM {
        std::fs::copy(dir.join(name), golden.join(name.replace('/', "__"))).unwrap();
    }
    std::fs::write(golden.join("hashes.txt"), hash_listing(dir)).unwrap();
}
