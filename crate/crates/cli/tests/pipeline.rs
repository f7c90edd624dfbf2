//! End-to-end runs of the command-line tool. Set `UPDATE_GOLDEN=1` to
//! rewrite the golden files after an intended output change.

mod common;

use std::path::Path;

use common::*;

#[test]
fn golden_pipeline_is_reproduced() {
    let dir = tempfile::tempdir().unwrap();
    pipeline(dir.path());
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        write_golden(dir.path());
    }
    let bad = golden_mismatches(dir.path());
    assert!(bad.is_empty(), "golden mismatches:\n{}", bad.join("\n"));
}

#[test]
fn reruns_are_byte_identical_and_inputs_untouched() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    run(p, &["synth", "--actors", "1", "--seconds", "1", "--seed", "4", "--out", "clean.csv"]);
    let clean_hash = sha256(&p.join("clean.csv"));
    let corrupt = ["corrupt", "--in", "clean.csv", "--mode", "bodypart", "--part", "limbs", "--d", "0.2", "--seed", "9", "--out", "gap.csv", "--mask-out", "mask.csv"];
    let fill = ["fill", "--in", "gap.csv", "--mask", "mask.csv", "--method", "interp", "--smooth-scope", "gaps", "--out", "filled.csv"];
    let eval = ["eval", "--pred", "filled.csv", "--gt", "clean.csv", "--mask", "mask.csv", "--scope", "missing", "--norm", "per_marker", "--out", "m.csv"];
    let mut first = vec![];
    for round in 0..2 {
        for args in [&corrupt[..], &fill[..], &eval[..]] {
            run(p, args);
        }
        let hashes: Vec<String> = ["gap.csv", "mask.csv", "filled.csv", "m.csv", "filled.csv.manifest.json"]
            .iter()
            .map(|f| sha256(&p.join(f)))
            .collect();
        if round == 0 {
            first = hashes;
        } else {
            assert_eq!(first, hashes);
        }
    }
    assert_eq!(sha256(&p.join("clean.csv")), clean_hash);
    let m = std::fs::read_to_string(p.join("m.csv")).unwrap();
    assert_eq!(m.lines().count(), 6);
    assert!(m.lines().all(|l| l.ends_with("per_marker") || l.starts_with("stimulus_id")));
}

#[test]
fn prediction_equal_to_ground_truth_scores_zero() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    run(p, &["synth", "--seconds", "0.5", "--out", "same.csv"]);
    run(p, &["eval", "--pred", "same.csv", "--gt", "same.csv", "--metrics", "rmse,vd_gt,bdp_gt", "--out", "m.csv"]);
    let m = std::fs::read_to_string(p.join("m.csv")).unwrap();
    let rows: Vec<&str> = m.lines().skip(1).collect();
    assert_eq!(rows.len(), 3);
    for r in rows {
        assert_eq!(r.split(',').nth(2), Some("0"), "{r}");
    }
}

#[test]
fn report_plots_one_point_per_stimulus() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let golden = golden_dir().join("metrics.csv");
    std::fs::copy(&golden, p.join("metrics.csv")).unwrap();
    std::fs::copy(fixtures().join("ratings.csv"), p.join("ratings.csv")).unwrap();
    run(p, &["report", "--metrics", "metrics.csv", "--ratings", "ratings.csv", "--out-dir", "with"]);
    run(p, &["report", "--metrics", "metrics.csv", "--out-dir", "without"]);
    let n = CONDITIONS.len() * TAKES.len();
    for metric in ["rmse", "vd_gt", "vd", "bdp_gt", "bdp"] {
        for file in [format!("with/scatter_{metric}.svg"), format!("without/values_{metric}.svg")] {
            let svg = std::fs::read_to_string(p.join(&file)).unwrap();
            assert_eq!(svg.matches("<circle class=\"point\"").count(), n, "{file}");
        }
    }
    let bars = std::fs::read_to_string(p.join("with/conditions.svg")).unwrap();
    assert_eq!(bars.matches("class=\"bar\"").count(), CONDITIONS.len() * 5);
}

fn code(p: &Path, args: &[&str]) -> i32 {
    run_raw(p, args).status.code().unwrap()
}

#[test]
fn exit_codes_follow_error_kind() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    run(p, &["synth", "--actors", "1", "--seconds", "0.5", "--out", "a.csv"]);

    // usage
    assert_eq!(code(p, &["eval", "--pred", "a.csv", "--out", "m.csv", "--metrics", "rmse"]), 2);
    assert_eq!(code(p, &["corrupt", "--in", "a.csv", "--mode", "iid", "--out", "b.csv", "--mask-out", "k.csv"]), 2);
    assert_eq!(code(p, &["fill", "--bogus"]), 2);

    // data / parse
    std::fs::write(p.join("bad.csv"), "frame,time,A1:X:x\n0,0,1\n").unwrap();
    assert_eq!(code(p, &["eval", "--pred", "bad.csv", "--out", "m.csv"]), 3);
    assert_eq!(code(p, &["eval", "--pred", "missing.csv", "--out", "m.csv"]), 3);

    // numeric: every metric value tied, so tau is undefined
    std::fs::write(
        p.join("metrics.csv"),
        "stimulus_id,metric,value,norm_mode\na_1,vd,1,per_coordinate\nb_1,vd,1,per_coordinate\n",
    )
    .unwrap();
    std::fs::write(p.join("ratings.csv"), "stimulus_id,rater_id,rating\na_1,r,1\nb_1,r,5\n").unwrap();
    assert_eq!(code(p, &["correlate", "--metrics", "metrics.csv", "--ratings", "ratings.csv", "--resamples", "10", "--out", "c.csv"]), 4);

    // unknown stimulus in the ratings
    std::fs::write(p.join("ratings.csv"), "stimulus_id,rater_id,rating\na_1,r,1\nzz_9,r,5\n").unwrap();
    let out = run_raw(p, &["correlate", "--metrics", "metrics.csv", "--ratings", "ratings.csv", "--out", "c.csv"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("zz_9"));
}

#[test]
fn correlate_warns_and_omits_partial_rows() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    std::fs::write(
        p.join("metrics.csv"),
        "stimulus_id,metric,value,norm_mode\n\
         a_1,vd,1,per_coordinate\nb_1,vd,2,per_coordinate\nc_1,vd,3,per_coordinate\nd_1,vd,4,per_coordinate\n\
         a_1,bdp,1,per_coordinate\n",
    )
    .unwrap();
    std::fs::write(
        p.join("ratings.csv"),
        "stimulus_id,rater_id,rating\na_1,r,5\nb_1,r,4\nc_1,r,2\nd_1,s,1\n",
    )
    .unwrap();
    let out = run_raw(p, &["correlate", "--metrics", "metrics.csv", "--ratings", "ratings.csv", "--resamples", "100", "--out", "c.csv"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    let c = std::fs::read_to_string(p.join("c.csv")).unwrap();
    let lines: Vec<&str> = c.lines().collect();
    assert_eq!(lines.len(), 2, "{c}");
    assert!(lines[1].starts_with("vd,1,"), "{c}");
}
