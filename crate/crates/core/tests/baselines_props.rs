use graphprop_core::baselines::gtvm_objective;
use graphprop_core::datagen::{random_graph_instance, seeded_rng};
use graphprop_core::{
    gtvm_inpaint, halrtc_complete, stack_acquisitions, unstack, DenseTensor, FiberMatrix, GtvmOptions, HalrtcParams,
    ObservationSet,
};
use rand::Rng;

#[test]
fn gtvm_is_locally_optimal_and_keeps_observed_rows() {
    for seed in 0..5 {
        let inst = random_graph_instance(120, 4.0, 0.4, 2, seed).unwrap();
        let t = inst.f0.select_rows(inst.omega.observed());
        let out = gtvm_inpaint(&inst.graph, &inst.omega, &t, &GtvmOptions::default()).unwrap();
        assert!(!out.singular);
        for (row, &p) in inst.omega.observed().iter().enumerate() {
            assert_eq!(out.completed.row(p), t.row(row));
        }
        let best = gtvm_objective(&inst.graph, &out.completed).unwrap();
        let mut rng = seeded_rng(seed + 50);
        for _ in 0..100 {
            let mut f = out.completed.clone();
            for p in inst.omega.missing() {
                for c in 0..2 {
                    f.set(p, c, f.get(p, c) + rng.random_range(-1e-3..1e-3));
                }
            }
            assert!(gtvm_objective(&inst.graph, &f).unwrap() >= best - 1e-12);
        }
    }
}

#[test]
fn gtvm_dense_and_iterative_paths_agree() {
    let inst = random_graph_instance(250, 5.0, 0.3, 1, 9).unwrap();
    let t = inst.f0.select_rows(inst.omega.observed());
    let dense = gtvm_inpaint(&inst.graph, &inst.omega, &t, &GtvmOptions::default()).unwrap();
    let cg = gtvm_inpaint(
        &inst.graph,
        &inst.omega,
        &t,
        &GtvmOptions {
            dense_max_nodes: 0,
            ..GtvmOptions::default()
        },
    )
    .unwrap();
    assert!(cg.converged);
    let diff: f64 = dense
        .completed
        .as_slice()
        .iter()
        .zip(cg.completed.as_slice())
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    assert!(diff <= 1e-8 * dense.completed.frobenius_norm());
}

#[test]
fn gtvm_recovers_the_perron_vector() {
    let inst = random_graph_instance(80, 4.0, 0.5, 1, 4).unwrap();
    let a = inst.graph.adjacency();
    // power iteration on A + I for the leading eigenvector
    let mut v = vec![1.0; 80];
    for _ in 0..5000 {
        let av = a.mul_vec(&v);
        let w: Vec<f64> = av.iter().zip(&v).map(|(x, y)| x + y).collect();
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        v = w.into_iter().map(|x| x / norm).collect();
    }
    let f0 = FiberMatrix::new(80, 1, v).unwrap();
    let out = gtvm_inpaint(
        &inst.graph,
        &inst.omega,
        &f0.select_rows(inst.omega.observed()),
        &GtvmOptions::default(),
    )
    .unwrap();
    for p in 0..80 {
        assert!((out.completed.get(p, 0) - f0.get(p, 0)).abs() < 1e-6);
    }
}

fn rel_err(a: &DenseTensor, b: &DenseTensor) -> f64 {
    let num: f64 = a
        .as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    let den: f64 = b.as_slice().iter().map(|x| x * x).sum();
    (num / den).sqrt()
}

#[test]
fn halrtc_recovers_rank_one_matrix() {
    let mut rng = seeded_rng(21);
    let u: Vec<f64> = (0..100).map(|_| rng.random_range(0.5..1.5)).collect();
    let v: Vec<f64> = (0..100).map(|_| rng.random_range(0.5..1.5)).collect();
    let t = DenseTensor::from_fn(vec![100, 100, 1], |i| u[i[0]] * v[i[1]]).unwrap();
    let mask: Vec<bool> = (0..t.len()).map(|_| rng.random_bool(0.7)).collect();
    let out = halrtc_complete(&t, &mask, &HalrtcParams::default()).unwrap();
    assert!(rel_err(&out.tensor, &t) <= 1e-3, "{}", rel_err(&out.tensor, &t));
    for (o, &m) in mask.iter().enumerate() {
        if m {
            assert_eq!(out.tensor.as_slice()[o].to_bits(), t.as_slice()[o].to_bits());
        }
    }
}

#[test]
fn halrtc_fixed_points() {
    let mut rng = seeded_rng(3);
    let t = DenseTensor::from_fn(vec![6, 5, 3], |_| rng.random_range(-1.0..1.0)).unwrap();
    let full = halrtc_complete(&t, &vec![true; t.len()], &HalrtcParams::default()).unwrap();
    assert_eq!(full.tensor, t);
    let z = DenseTensor::zeros(vec![6, 5, 3]).unwrap();
    let mask: Vec<bool> = (0..z.len()).map(|o| o % 3 != 0).collect();
    let out = halrtc_complete(&z, &mask, &HalrtcParams::default()).unwrap();
    assert!(out.tensor.as_slice().iter().all(|&v| v == 0.0));
}

#[test]
fn halrtc_objective_ends_below_its_start() {
    // ADMM is not monotone in the objective; small transient rises do occur
    for seed in 0..6u64 {
        let mut rng = seeded_rng(seed);
        let a: Vec<f64> = (0..20).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..15).map(|_| rng.random_range(-1.0..1.0)).collect();
        let noisy = seed % 2 == 1;
        let t = DenseTensor::from_fn(vec![20, 15, 2], |i| {
            let base = a[i[0]] * b[i[1]] * (1.0 + i[2] as f64);
            if noisy {
                base + rng.random_range(-1.0..1.0)
            } else {
                base
            }
        })
        .unwrap();
        let mask: Vec<bool> = (0..t.len()).map(|_| rng.random_bool(0.6)).collect();
        let params = HalrtcParams {
            track_objective: true,
            ..HalrtcParams::default()
        };
        let out = halrtc_complete(&t, &mask, &params).unwrap();
        let h = &out.objective_history;
        assert_eq!(h.len(), out.iterations + 1);
        assert!(h[h.len() - 1] < h[0], "seed {seed}: {} -> {}", h[0], h[h.len() - 1]);
        assert!(out.converged);
    }
}

#[test]
fn stacking_two_rasters() {
    let x = DenseTensor::from_fn(vec![20, 20, 3], |i| (i[0] + 2 * i[1] + 3 * i[2]) as f64).unwrap();
    let y = DenseTensor::from_fn(vec![20, 20, 3], |i| (i[0] * i[1]) as f64 - i[2] as f64).unwrap();
    let s = stack_acquisitions(&[x.clone(), y.clone()]).unwrap();
    assert_eq!(s.shape(), &[20, 20, 3, 2]);
    assert_eq!(unstack(&s).unwrap(), vec![x.clone(), y]);
    assert_eq!(stack_acquisitions(&[x.clone()]).unwrap().shape(), &[20, 20, 3, 1]);
    let z = DenseTensor::zeros(vec![20, 3]).unwrap();
    assert!(stack_acquisitions(&[x, z]).is_err());
}

#[test]
fn gtvm_rejects_bad_input() {
    let inst = random_graph_instance(10, 2.0, 0.3, 1, 1).unwrap();
    let bad = FiberMatrix::new(inst.omega.len(), 1, vec![f64::NAN; inst.omega.len()]);
    assert!(bad.is_err() || gtvm_inpaint(&inst.graph, &inst.omega, &bad.unwrap(), &GtvmOptions::default()).is_err());
    let wrong = ObservationSet::full(11);
    let t = FiberMatrix::zeros(11, 1);
    assert!(gtvm_inpaint(&inst.graph, &wrong, &t, &GtvmOptions::default()).is_err());
}
