mod common;

use common::*;
use proptest::prelude::*;
use rand::Rng;
use temporal_tensor::baselines::{cp_gradient, cp_objective, pttf_gradient, pttf_objective, SgdParams};
use temporal_tensor::objective::{grad_f, local_lagrangian, loss_f, loss_g, loss_l, rmse, surrogate_h, HyperParams};
use temporal_tensor::tensor::split_tensor;
use temporal_tensor::{Dims, FactorSet};

const FD_STEP: f64 = 1e-5;

fn fd_check(factors: &FactorSet, analytic: [&temporal_tensor::Matrix; 3], f: impl Fn(&FactorSet) -> f64) -> f64 {
    let fields = [field_a, field_b, field_c];
    fields
        .iter()
        .zip(analytic)
        .map(|(field, g)| gradient_rel_err(g, &central_difference(factors, *field, FD_STEP, &f)))
        .fold(0.0, f64::max)
}

#[test]
fn grad_f_matches_finite_differences_on_5x4x3() {
    let mut r = rng(42);
    let dims = Dims::new(5, 4, 3);
    let t = random_tensor(&mut r, dims, 20, 5.0);
    let f = random_factors(&mut r, 5, 4, 3, 3, 1.0);
    let g = grad_f(&t, &f).unwrap();
    let err = fd_check(&f, [&g.da, &g.db, &g.dc], |x| loss_f(&t, x).unwrap());
    assert!(err < 1e-6, "relative error {err:e}");
}

#[test]
fn grad_f_matches_finite_differences_on_random_instances() {
    let mut r = rng(7);
    for _ in 0..20 {
        let dims = Dims::new(r.random_range(1..=10), r.random_range(1..=8), r.random_range(1..=6));
        let rank = r.random_range(1..=4);
        let n = r.random_range(1..=dims.i * dims.j * dims.k);
        let t = random_tensor(&mut r, dims, n, 5.0);
        let f = random_factors(&mut r, dims.i, dims.j, dims.k, rank, 1.0);
        let g = grad_f(&t, &f).unwrap();
        let err = fd_check(&f, [&g.da, &g.db, &g.dc], |x| loss_f(&t, x).unwrap());
        assert!(err < 1e-6, "dims {dims} R={rank}: relative error {err:e}");
    }
}

fn sgd_params(r: &mut rand_chacha::ChaCha8Rng, rank: usize) -> SgdParams {
    SgdParams {
        lambda_a: r.random_range(0.0..1.0),
        lambda_b: r.random_range(0.0..1.0),
        lambda_c: r.random_range(0.0..1.0),
        lambda_0: r.random_range(0.0..1.0),
        mu_c: (0..rank).map(|_| r.random_range(-1.0..1.0)).collect(),
        ..SgdParams::default()
    }
}

#[test]
fn cp_gradient_matches_finite_differences() {
    let mut r = rng(8);
    for _ in 0..10 {
        let dims = Dims::new(r.random_range(2..=8), r.random_range(2..=6), r.random_range(2..=6));
        let rank = r.random_range(1..=4);
        let t = random_tensor(&mut r, dims, dims.i * dims.j, 5.0);
        let f = random_factors(&mut r, dims.i, dims.j, dims.k, rank, 1.0);
        let p = sgd_params(&mut r, rank);
        let g = cp_gradient(&t, &f, &p).unwrap();
        let err = fd_check(&f, [&g.da, &g.db, &g.dc], |x| cp_objective(&t, x, &p).unwrap());
        assert!(err < 1e-6, "relative error {err:e}");
    }
}

#[test]
fn pttf_gradient_matches_finite_differences() {
    let mut r = rng(9);
    for _ in 0..10 {
        let dims = Dims::new(r.random_range(2..=8), r.random_range(2..=6), r.random_range(1..=6));
        let rank = r.random_range(1..=4);
        let t = random_tensor(&mut r, dims, dims.i * dims.j, 5.0);
        let f = random_factors(&mut r, dims.i, dims.j, dims.k, rank, 1.0);
        let p = sgd_params(&mut r, rank);
        let (g, dc0) = pttf_gradient(&t, &f, &p).unwrap();
        let obj = |x: &FactorSet| pttf_objective(&t, x, &p).unwrap();
        let err = fd_check(&f, [&g.da, &g.db, &g.dc], obj);
        assert!(err < 1e-6, "relative error {err:e}");

        for (n, analytic) in dc0.iter().enumerate() {
            let mut hi = f.clone();
            hi.c0[n] += FD_STEP;
            let mut lo = f.clone();
            lo.c0[n] -= FD_STEP;
            let numeric = (obj(&hi) - obj(&lo)) / (2.0 * FD_STEP);
            assert!((analytic - numeric).abs() < 1e-6 * analytic.abs().max(1.0));
        }
    }
}

struct SurrogateCase {
    tensor: temporal_tensor::SparseTemporalTensor,
    current: FactorSet,
    duals: temporal_tensor::objective::DualPair,
    b_bar: temporal_tensor::Matrix,
    c_bar: temporal_tensor::Matrix,
    hp: HyperParams,
}

fn surrogate_case(seed: u64) -> SurrogateCase {
    let mut r = rng(seed);
    let dims = Dims::new(10, 8, 6);
    let rank = 3;
    SurrogateCase {
        tensor: random_tensor(&mut r, dims, 200, 5.0),
        current: random_factors(&mut r, 10, 8, 6, rank, 1.0),
        duals: random_duals(&mut r, 8, 6, rank, 0.5),
        b_bar: uniform_matrix(&mut r, 8, rank, 1.0),
        c_bar: uniform_matrix(&mut r, 6, rank, 1.0),
        hp: HyperParams::with_rank(rank),
    }
}

impl SurrogateCase {
    fn h(&self, candidate: &FactorSet, tau: f64) -> f64 {
        surrogate_h(
            candidate,
            &self.current,
            &self.tensor,
            &self.current.c0,
            &self.duals,
            &self.b_bar,
            &self.c_bar,
            tau,
            &self.hp,
        )
        .unwrap()
    }

    fn l(&self, candidate: &FactorSet) -> f64 {
        let mut at = candidate.clone();
        at.c0 = self.current.c0.clone();
        local_lagrangian(&self.tensor, &at, &self.duals, &self.b_bar, &self.c_bar, &self.hp).unwrap()
    }
}

#[test]
fn surrogate_is_tight_at_the_anchor_for_any_tau() {
    let case = surrogate_case(1);
    let l = case.l(&case.current);
    for tau in [1e-6, 1e-4, 0.3, 10.0] {
        assert!(rel_err(case.h(&case.current, tau), l) <= 1e-10);
    }
}

#[test]
fn surrogate_dominates_lagrangian_near_the_anchor() {
    let case = surrogate_case(2);
    let mut r = rng(3);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..100 {
        let mut dir = random_factors(&mut r, 10, 8, 6, 3, 1.0);
        // Scale every row of the perturbation to Frobenius norm ≤ 0.1.
        let radius = r.random_range(0.0..0.1);
        for m in [&mut dir.a, &mut dir.b, &mut dir.c] {
            for i in 0..m.rows() {
                let norm = m.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
                m.row_mut(i).iter_mut().for_each(|v| *v *= radius / norm);
            }
        }
        let cand = shifted(&case.current, &dir, 1.0);
        worst = worst.max(case.l(&cand) - case.h(&cand, 1e-4));
    }
    assert!(worst <= 1e-10, "L exceeded H by {worst:e}");
}

#[test]
fn lagrangian_is_sum_of_its_parts() {
    let mut r = rng(4);
    for _ in 0..10 {
        let t = random_tensor(&mut r, Dims::new(6, 5, 4), 30, 3.0);
        let f = random_factors(&mut r, 6, 5, 4, 2, 1.0);
        let duals = random_duals(&mut r, 5, 4, 2, 1.0);
        let b_bar = uniform_matrix(&mut r, 5, 2, 1.0);
        let c_bar = uniform_matrix(&mut r, 4, 2, 1.0);
        let hp = HyperParams::with_rank(2).lambdas(0.3, 0.2, 0.7, 0.1).rhos(0.4, 0.9);
        let sum = loss_f(&t, &f).unwrap()
            + loss_g(&f, &hp).unwrap()
            + loss_l(&f.b, &f.c, &duals, &b_bar, &c_bar, &hp).unwrap();
        assert_eq!(local_lagrangian(&t, &f, &duals, &b_bar, &c_bar, &hp).unwrap(), sum);
    }
}

#[test]
fn global_lagrangian_is_sum_over_workers_when_in_consensus() {
    // Zero regularization, zero duals, local copies at consensus: Σ_p L^p = f.
    let mut r = rng(5);
    let t = random_tensor(&mut r, Dims::new(9, 4, 3), 60, 3.0);
    let hp = HyperParams::with_rank(2).lambdas(0.0, 0.0, 0.0, 0.0);
    let full = random_factors(&mut r, 9, 4, 3, 2, 1.0);
    let part = split_tensor(&t, 3).unwrap();
    let duals = temporal_tensor::objective::DualPair::zeros(4, 3, 2);
    let total: f64 = part
        .blocks
        .iter()
        .map(|blk| {
            let local = FactorSet {
                a: full.a.slice_rows(blk.row_offset, blk.rows()),
                ..full.clone()
            };
            local_lagrangian(&blk.subtensor, &local, &duals, &full.b, &full.c, &hp).unwrap()
        })
        .sum();
    assert!(rel_err(total, loss_f(&t, &full).unwrap()) < 1e-12);
}

#[test]
fn rmse_matches_definition() {
    let mut r = rng(6);
    let t = random_tensor(&mut r, Dims::new(4, 4, 4), 20, 2.0);
    let f = random_factors(&mut r, 4, 4, 4, 2, 1.0);
    let want = (2.0 * loss_f(&t, &f).unwrap() / 20.0).sqrt();
    assert!(rel_err(rmse(&t, &f.a, &f.b, &f.c).unwrap(), want) < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn surrogate_midpoint_convexity(seed in 0u64..10_000, tau in 1e-4f64..1.0, scale in 0.01f64..2.0) {
        let case = surrogate_case(seed);
        let mut r = rng(seed ^ 0xabc);
        let x = shifted(&case.current, &random_factors(&mut r, 10, 8, 6, 3, 1.0), scale);
        let y = shifted(&case.current, &random_factors(&mut r, 10, 8, 6, 3, 1.0), scale);
        let mut mid = x.clone();
        for (m, (a, b)) in [&mut mid.a, &mut mid.b, &mut mid.c].into_iter().zip([(&x.a, &y.a), (&x.b, &y.b), (&x.c, &y.c)]) {
            for ((v, p), q) in m.as_mut_slice().iter_mut().zip(a.as_slice()).zip(b.as_slice()) {
                *v = 0.5 * (p + q);
            }
        }
        let lhs = case.h(&mid, tau);
        let rhs = 0.5 * case.h(&x, tau) + 0.5 * case.h(&y, tau);
        prop_assert!(lhs <= rhs + 1e-10 * rhs.abs().max(1.0));
    }

    #[test]
    fn losses_are_nonnegative(seed in 0u64..10_000) {
        let mut r = rng(seed);
        let t = random_tensor(&mut r, Dims::new(5, 4, 3), 15, 5.0);
        let f = random_factors(&mut r, 5, 4, 3, 2, 2.0);
        let hp = HyperParams::with_rank(2).lambdas(0.5, 0.5, 0.5, 0.5);
        prop_assert!(loss_f(&t, &f).unwrap() >= 0.0);
        prop_assert!(loss_g(&f, &hp).unwrap() >= 0.0);
        prop_assert!(rmse(&t, &f.a, &f.b, &f.c).unwrap() >= 0.0);
    }
}
