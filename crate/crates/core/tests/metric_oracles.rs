//! Every metric and the training loss against direct-loop oracles on small
//! random instances.

use std::collections::BTreeMap;

use mocap_gapeval::metrics::{bdp, bdp_gt, bone_lengths, rmse, training_loss, vd, vd_gt};
use mocap_gapeval::{BoneDef, MarkerDef, MarkerSequence, NormMode, ObservationMask, PointGrid, SkeletonConfig};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

type Frames = Vec<Vec<[f64; 3]>>;

struct Instance {
    pred: Frames,
    gt: Frames,
    observed: Vec<Vec<bool>>,
    /// Marker indices of each bone's two endpoint sets.
    bones: Vec<(Vec<usize>, Vec<usize>)>,
    lambda: f64,
}

fn random_frames(rng: &mut StdRng, t: usize, m: usize) -> Frames {
    (0..t)
        .map(|_| (0..m).map(|_| [0, 1, 2].map(|_| rng.random_range(-50.0..50.0))).collect())
        .collect()
}

fn random_instance(rng: &mut StdRng) -> Instance {
    let t = rng.random_range(2..=6);
    let m = rng.random_range(1..=4);
    let gt = random_frames(rng, t, m);
    let pred = random_frames(rng, t, m);
    let observed = (0..t).map(|_| (0..m).map(|_| rng.random_bool(0.5)).collect()).collect();
    let n_bones = if m < 2 { 0 } else { rng.random_range(1..=2) };
    let bones = (0..n_bones)
        .map(|_| {
            let mut ids: Vec<usize> = (0..m).collect();
            ids.shuffle(rng);
            let split = rng.random_range(1..m);
            let rest = rng.random_range(split + 1..=m);
            (ids[..split].to_vec(), ids[split..rest].to_vec())
        })
        .collect();
    Instance {
        pred,
        gt,
        observed,
        bones,
        lambda: rng.random_range(0.0..3.0),
    }
}

fn ids(m: usize) -> Vec<String> {
    (0..m).map(|i| format!("A1:M{i}")).collect()
}

fn to_seq(f: &Frames) -> MarkerSequence {
    let m = f[0].len();
    MarkerSequence::from_full(PointGrid::from_fn(f.len(), m, |t, k| f[t][k]), ids(m), 120.0).unwrap()
}

fn to_mask(o: &[Vec<bool>]) -> ObservationMask {
    ObservationMask::from_bits(o.len(), o[0].len(), o.concat()).unwrap()
}

fn to_skel(m: usize, bones: &[(Vec<usize>, Vec<usize>)]) -> SkeletonConfig {
    let ids = ids(m);
    let mut hips = BTreeMap::new();
    hips.insert("A1".to_string(), vec![ids[0].clone()]);
    SkeletonConfig::new(
        vec!["A1".into()],
        ids.iter().map(|id| MarkerDef { id: id.clone(), actor: "A1".into() }).collect(),
        hips,
        [ids.clone(), vec![], vec![], vec![]],
        bones
            .iter()
            .enumerate()
            .map(|(i, (a, b))| BoneDef {
                name: format!("b{i}"),
                end_a: a.iter().map(|&k| ids[k].clone()).collect(),
                end_b: b.iter().map(|&k| ids[k].clone()).collect(),
            })
            .collect(),
        vec![],
        vec![],
        None,
    )
    .unwrap()
}

fn sq(a: [f64; 3], b: [f64; 3]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)
}

fn diff(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn per_slot(norm: NormMode) -> f64 {
    match norm {
        NormMode::PerCoordinate => 3.0,
        NormMode::PerMarker => 1.0,
    }
}

fn oracle_rmse(p: &Frames, g: &Frames, norm: NormMode, missing_only: Option<&[Vec<bool>]>) -> Option<f64> {
    let mut s = 0.0;
    let mut n = 0.0;
    for t in 0..p.len() {
        for k in 0..p[t].len() {
            if missing_only.is_some_and(|o| o[t][k]) {
                continue;
            }
            s += sq(p[t][k], g[t][k]);
            n += 1.0;
        }
    }
    (n > 0.0).then(|| (s / (n * per_slot(norm))).sqrt())
}

fn oracle_vd_gt(p: &Frames, g: &Frames, norm: NormMode) -> f64 {
    let (mut s, mut n) = (0.0, 0.0);
    for t in 1..p.len() {
        for k in 0..p[t].len() {
            s += sq(diff(p[t][k], p[t - 1][k]), diff(g[t][k], g[t - 1][k]));
            n += 1.0;
        }
    }
    (s / (n * per_slot(norm))).sqrt()
}

#[allow(clippy::needless_range_loop)]
fn oracle_vd(p: &Frames, norm: NormMode) -> f64 {
    let (mut s, mut n) = (0.0, 0.0);
    for t in 1..p.len() - 1 {
        for k in 0..p[t].len() {
            s += sq(diff(p[t + 1][k], p[t][k]), diff(p[t][k], p[t - 1][k]));
            n += 1.0;
        }
    }
    (s / (n * per_slot(norm))).sqrt()
}

fn oracle_length(f: &[[f64; 3]], a: &[usize], b: &[usize]) -> f64 {
    let c = |set: &[usize]| {
        let mut c = [0.0; 3];
        for &k in set {
            for i in 0..3 {
                c[i] += f[k][i] / set.len() as f64;
            }
        }
        c
    };
    sq(c(a), c(b)).sqrt()
}

fn oracle_bdp_gt(p: &Frames, g: &Frames, bones: &[(Vec<usize>, Vec<usize>)]) -> f64 {
    let (mut s, mut n) = (0.0, 0.0);
    for t in 0..p.len() {
        for (a, b) in bones {
            s += (oracle_length(&p[t], a, b) - oracle_length(&g[t], a, b)).powi(2);
            n += 1.0;
        }
    }
    (s / n).sqrt()
}

fn oracle_bdp(p: &Frames, bones: &[(Vec<usize>, Vec<usize>)]) -> f64 {
    let (mut s, mut n) = (0.0, 0.0);
    for t in 1..p.len() {
        for (a, b) in bones {
            s += (oracle_length(&p[t], a, b) - oracle_length(&p[t - 1], a, b)).powi(2);
            n += 1.0;
        }
    }
    (s / n).sqrt()
}

fn oracle_loss(p: &Frames, g: &Frames, o: &[Vec<bool>], lambda: f64) -> (f64, f64, f64) {
    let t_len = p.len() as f64;
    let mut pos = 0.0;
    let mut vel = 0.0;
    for t in 0..p.len() {
        for k in 0..p[t].len() {
            if o[t][k] {
                continue;
            }
            pos += sq(p[t][k], g[t][k]);
            if t > 0 {
                vel += sq(diff(g[t][k], g[t - 1][k]), diff(p[t][k], p[t - 1][k]));
            }
        }
    }
    let (pos, vel) = (pos / t_len, vel / (t_len - 1.0));
    (pos + lambda * vel, pos, vel)
}

#[track_caller]
fn close(got: f64, want: f64, what: &str, case: usize) {
    let tol = 1e-9 * want.abs().max(1e-3);
    assert!((got - want).abs() <= tol, "case {case} {what}: got {got}, oracle {want}");
}

#[test]
fn two_hundred_random_instances_match_loop_oracles() {
    let mut rng = StdRng::seed_from_u64(20_240_601);
    let mut checked = 0;
    for case in 0..200 {
        let inst = random_instance(&mut rng);
        let (t, m) = (inst.gt.len(), inst.gt[0].len());
        let pred = to_seq(&inst.pred);
        let gt = to_seq(&inst.gt);
        let mask = to_mask(&inst.observed);
        let skel = to_skel(m, &inst.bones);
        assert!(inst.bones.len() <= 2 && t <= 6 && m <= 4);

        for norm in [NormMode::PerCoordinate, NormMode::PerMarker] {
            close(rmse(&pred, &gt, norm, None).unwrap(), oracle_rmse(&inst.pred, &inst.gt, norm, None).unwrap(), "rmse", case);
            match oracle_rmse(&inst.pred, &inst.gt, norm, Some(&inst.observed)) {
                Some(want) => close(rmse(&pred, &gt, norm, Some(&mask)).unwrap(), want, "scoped rmse", case),
                None => assert!(rmse(&pred, &gt, norm, Some(&mask)).is_err()),
            }
            close(vd_gt(&pred, &gt, norm).unwrap(), oracle_vd_gt(&inst.pred, &inst.gt, norm), "vd_gt", case);
            if t >= 3 {
                close(vd(&pred, norm).unwrap(), oracle_vd(&inst.pred, norm), "vd", case);
            } else {
                assert!(vd(&pred, norm).is_err());
            }
        }

        if inst.bones.is_empty() {
            assert!(bdp_gt(&pred, &gt, &skel).is_err());
            assert!(bdp(&pred, &skel).is_err());
        } else {
            let lengths = bone_lengths(&pred, &skel).unwrap();
            for (d, (a, b)) in inst.bones.iter().enumerate() {
                close(lengths.get(0, d), oracle_length(&inst.pred[0], a, b), "bone length", case);
            }
            close(bdp_gt(&pred, &gt, &skel).unwrap(), oracle_bdp_gt(&inst.pred, &inst.gt, &inst.bones), "bdp_gt", case);
            close(bdp(&pred, &skel).unwrap(), oracle_bdp(&inst.pred, &inst.bones), "bdp", case);
        }

        let loss = training_loss(&pred, &gt, &mask, inst.lambda).unwrap();
        let (total, pos, vel) = oracle_loss(&inst.pred, &inst.gt, &inst.observed, inst.lambda);
        close(loss.total, total, "loss", case);
        close(loss.position, pos, "loss position", case);
        close(loss.velocity, vel, "loss velocity", case);
        checked += 1;
    }
    assert_eq!(checked, 200);
}

#[test]
fn prediction_equal_to_ground_truth_scores_zero() {
    let mut rng = StdRng::seed_from_u64(7);
    for _ in 0..20 {
        let inst = random_instance(&mut rng);
        let gt = to_seq(&inst.gt);
        let skel = to_skel(inst.gt[0].len(), &inst.bones);
        let mask = to_mask(&inst.observed);
        assert_eq!(rmse(&gt, &gt, NormMode::PerCoordinate, None).unwrap(), 0.0);
        assert_eq!(vd_gt(&gt, &gt, NormMode::PerMarker).unwrap(), 0.0);
        if !inst.bones.is_empty() {
            assert_eq!(bdp_gt(&gt, &gt, &skel).unwrap(), 0.0);
        }
        assert_eq!(training_loss(&gt, &gt, &mask, 2.0).unwrap().total, 0.0);
    }
}

#[test]
fn loss_ignores_observed_entries() {
    let mut rng = StdRng::seed_from_u64(11);
    let inst = random_instance(&mut rng);
    let all = vec![vec![true; inst.gt[0].len()]; inst.gt.len()];
    let loss = training_loss(&to_seq(&inst.pred), &to_seq(&inst.gt), &to_mask(&all), 1.0).unwrap();
    assert_eq!(loss.total, 0.0);
}
