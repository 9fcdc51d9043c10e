use super::*;
use crate::game_core::{feasible_rate_box, induced_server_utility};
use proptest::prelude::{prop_assert, prop_assert_eq, prop_assume, proptest, ProptestConfig};
use proptest::strategy::Strategy as _;

fn profile(id: usize, gamma: f64, delta: f64, t_min: f64) -> ClientProfile {
    ClientProfile::new(id, gamma, delta, t_min).unwrap()
}

fn params(n: usize) -> SystemParams {
    SystemParams::new(80.0, 50.0, 0.0, n).unwrap()
}

fn identical(n: usize) -> Vec<ClientProfile> {
    (0..n).map(|k| profile(k, 2.0, 1.0, 1.0)).collect()
}

/// Independent bisection used to freeze the fixtures below.
fn oracle_bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let up = f(lo) > 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == up {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

const LN2P1: f64 = 1.0 + std::f64::consts::LN_2;

#[test]
fn frozen_fixtures_match_oracle() {
    let r2 = oracle_bisect(|r| 50.0 / r - 1.0 - r.ln(), 1.0, 100.0);
    assert!((r2 - 13.795_582_974_561_72).abs() < 1e-10);
    let r1 = oracle_bisect(
        |r| {
            let x = (r / 2.0 - 1.0).exp();
            40.0 * x - 30.0 * (r * x / 2.0 + x - 1.0)
        },
        2.0,
        2.0 * LN2P1,
    );
    assert!((r1 - 2.347_598_160_441_721).abs() < 1e-10);
}

#[test]
fn first_derivative_examples() {
    let one = identical(1);
    let d = du_dr1(&one, &params(1), 3.0);
    assert!((d - (37.5 * 0.5f64.exp() + 1.0)).abs() < 1e-12);
    assert!((d - 62.827_047_651_254_8).abs() < 1e-9);

    let thirty = identical(30);
    assert!(du_dr1(&thirty, &params(30), 2.2) > 0.0);
    assert!(du_dr1(&thirty, &params(30), 2.5) < 0.0);

    let p = [profile(0, 1.0, 1.0, 1.0)];
    assert!((du_dr2(&p, &params(1), 10.0) - (4.0 - 10f64.ln())).abs() < 1e-12);
    assert!(du_dr2(&p, &params(1), 49f64.exp()) < 0.0);
    // At r2 = delta the log term vanishes.
    let q = [profile(0, 1.0, 2.0, 1.0)];
    assert!((du_dr2(&q, &params(1), 2.0) - (50.0 / 4.0 - 0.5)).abs() < 1e-12);
}

#[test]
fn second_derivative_examples() {
    let one = identical(1);
    // e^0.5 * ((80 - 3) / 4 - 1)
    let d2 = d2u_dr1(&one, &params(1), 3.0);
    assert!((d2 - 18.25 * 0.5f64.exp()).abs() < 1e-12);
    let h = 1e-4;
    let fd = (du_dr1(&one, &params(1), 3.0 + h) - du_dr1(&one, &params(1), 3.0 - h)) / (2.0 * h);
    assert!((fd - d2).abs() / d2.abs() < 1e-7);

    let p = [profile(0, 1.0, 1.0, 1.0)];
    assert!((d2u_dr2(&p, &params(1), 10.0) + 0.6).abs() < 1e-12);
}

#[test]
fn accuracy_leg_is_not_concave_everywhere() {
    // Thirty workers: concave across the box. One worker: convex.
    let thirty = identical(30);
    for i in 0..=20 {
        let r1 = 2.0 + i as f64 * (LN2P1 * 2.0 - 2.0) / 20.0;
        assert!(d2u_dr1(&thirty, &params(30), r1) < 0.0);
        assert!(d2u_dr1(&identical(1), &params(1), r1) > 0.0);
    }
}

#[test]
fn solve_r2_single_client() {
    let p = [profile(0, 2.0, 1.0, 1.0)];
    let b = feasible_rate_box(&p, 100.0).unwrap();
    for model in [ResponseModel::Interior, ResponseModel::Clamped] {
        let s = solve_r2(&p, &params(1), &b, model).unwrap();
        assert!(
            (s.rate - 13.795_582_974_561_72).abs() < 1e-8,
            "{model:?} {s:?}"
        );
        assert!(!s.boundary);
        assert!(s.residual < SLOPE_TOL);
    }
}

#[test]
fn solve_r1_single_client() {
    let p = [profile(0, 2.0, 1.0, 1.0)];
    let b = feasible_rate_box(&p, 100.0).unwrap();

    // Unclamped responses: slope positive across the box, upper edge.
    let s = solve_r1(&p, &params(1), &b, ResponseModel::Interior).unwrap();
    assert_eq!(s.rate, b.r1_hi);
    assert!(s.boundary);
    assert!((s.rate - 3.386_294_361_119_89).abs() < 1e-12);

    // Clamped responses: accuracy saturates at A_MAX before the edge, after
    // which raising r1 only raises the payout. Optimum at the saturation kink.
    let s = solve_r1(&p, &params(1), &b, ResponseModel::Clamped).unwrap();
    let kink = 2.0 * (1.0 + A_MAX.ln_1p());
    assert!((s.rate - kink).abs() < 1e-12, "{s:?}");
    assert!((s.rate - 3.385_294_111_036_526).abs() < 1e-12);
    assert!(!s.boundary);
    assert_eq!(s.residual, 0.0);
}

#[test]
fn solve_r1_thirty_identical_clients() {
    let pop = identical(30);
    let b = feasible_rate_box(&pop, 100.0).unwrap();
    for model in [ResponseModel::Interior, ResponseModel::Clamped] {
        let s = solve_r1(&pop, &params(30), &b, model).unwrap();
        assert!(
            (s.rate - 2.347_598_160_441_721).abs() < 1e-8,
            "{model:?} {s:?}"
        );
        assert!(!s.boundary);
        assert!(s.residual < SLOPE_TOL);
    }
}

#[test]
fn single_client_equilibrium() {
    let p = [profile(0, 2.0, 1.0, 1.0)];
    let b = feasible_rate_box(&p, 100.0).unwrap();

    let eq = compute_equilibrium_with(&p, &params(1), &b, ResponseModel::Interior).unwrap();
    assert!((eq.rates.r1() - 3.386_294).abs() < 1e-6);
    assert!((eq.rates.r2() - 13.796).abs() < 1e-3);
    assert_eq!(eq.strategies[0].accuracy(), A_MAX);
    assert!(eq.accuracy_clamped[0]);
    assert!((eq.strategies[0].freshness() - 13.795_582_974_561_72f64.ln()).abs() < 1e-8);
    assert!(eq.r1_boundary && !eq.r2_boundary);

    let eq = compute_equilibrium(&p, &params(1), &b).unwrap();
    assert!((eq.rates.r1() - 3.385_294_111).abs() < 1e-8);
    assert!((eq.strategies[0].accuracy() - A_MAX).abs() < 1e-12);
    assert!((eq.strategies[0].freshness() - 2.624_348_3).abs() < 1e-6);
    assert!(!eq.r1_boundary && !eq.r2_boundary);
    assert!(eq.foc_residuals.0 < SLOPE_TOL && eq.foc_residuals.1 < SLOPE_TOL);
    assert_eq!(eq.strategies.len(), 1);
    assert!(
        (eq.server_utility - induced_server_utility(&p, &params(1), &eq.rates).unwrap()).abs()
            < 1e-12
    );
}

#[test]
fn identical_clients_get_identical_strategies() {
    let pop = identical(7);
    let b = feasible_rate_box(&pop, 100.0).unwrap();
    let eq = compute_equilibrium(&pop, &params(7), &b).unwrap();
    assert!(eq.strategies.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn time_rescaling_scales_r1_only() {
    let pop: Vec<_> = [(2.0, 1.0, 1.0), (3.0, 1.5, 2.0), (2.5, 1.2, 1.5)]
        .iter()
        .enumerate()
        .map(|(k, &(g, d, t))| profile(k, g, d, t))
        .collect();
    let c = 2.5;
    let scaled: Vec<_> = pop
        .iter()
        .map(|p| profile(p.id(), p.gamma(), p.delta(), p.t_min() * c))
        .collect();
    // r1 A / T is unchanged when r1 and T scale together.
    let base = SystemParams::new(80.0, 50.0, 0.0, 3).unwrap();
    let b = feasible_rate_box(&pop, 100.0).unwrap();
    let bs = feasible_rate_box(&scaled, 100.0).unwrap();
    assert!((bs.r1_lo - c * b.r1_lo).abs() < 1e-12 && (bs.r1_hi - c * b.r1_hi).abs() < 1e-12);
    for model in [ResponseModel::Interior, ResponseModel::Clamped] {
        let s = solve_r1(&pop, &base, &b, model).unwrap();
        let ss = solve_r1(&scaled, &base, &bs, model).unwrap();
        assert!(
            (ss.rate - c * s.rate).abs() < 1e-7 * c * s.rate,
            "{model:?}: {} vs {}",
            ss.rate,
            s.rate
        );
        let a = interior_accuracy(&pop[0], s.rate);
        let a_scaled = interior_accuracy(&scaled[0], ss.rate);
        assert!((a - a_scaled).abs() < 1e-7);
    }
}

fn population_strategy(
) -> impl proptest::strategy::Strategy<Value = (Vec<ClientProfile>, SystemParams)> {
    (1usize..=12).prop_flat_map(|n| {
        (
            proptest::collection::vec((0.5f64..10.0, 0.05f64..6.0, 0.5f64..3.0), n),
            10.0f64..200.0,
            10.0f64..200.0,
        )
            .prop_map(move |(raw, alpha, beta)| {
                let profiles = raw
                    .iter()
                    .enumerate()
                    .map(|(k, &(g, d, t))| profile(k, g, d, t))
                    .collect();
                (profiles, SystemParams::new(alpha, beta, 0.1, n).unwrap())
            })
    })
}

/// Fourth-order central difference.
fn central(f: impl Fn(f64) -> f64, x: f64, h: f64) -> f64 {
    (f(x - 2.0 * h) - 8.0 * f(x - h) + 8.0 * f(x + h) - f(x + 2.0 * h)) / (12.0 * h)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn analytic_derivatives_match_finite_differences(
        (pop, par) in population_strategy(), u1 in 0.02f64..0.98, u2 in 0.02f64..0.98,
    ) {
        let b = feasible_rate_box(&pop, 100.0).unwrap();
        let r1 = b.r1_lo + u1 * (b.r1_hi - b.r1_lo);
        let r2 = b.r2_lo + u2 * (b.r2_hi - b.r2_lo);
        // The utility separates into an r1 leg and an r2 leg. Differencing
        // each leg alone avoids cancellation against a much larger other leg.
        let leg1 = AccuracyLeg { profiles: &pop, params: &par, model: ResponseModel::Interior };
        let leg2 = FreshnessLeg { profiles: &pop, params: &par, model: ResponseModel::Interior };
        let whole = leader_utility(&pop, &par, &RewardRates::new(r1, r2).unwrap(), ResponseModel::Interior).unwrap();
        let slowest = pop.iter().map(|p| p.t_min()).fold(0.0, f64::max);
        let parts = leg1.value(r1) + leg2.value(r2) - slowest;
        prop_assert!((whole - parts).abs() <= 1e-12 * (leg1.value(r1).abs() + leg2.value(r2).abs() + slowest));
        let fd1 = central(|x| leg1.value(x), r1, 1e-4 * r1);
        let fd2 = central(|x| leg2.value(x), r2, 1e-4 * r2);
        let an1 = du_dr1(&pop, &par, r1);
        let an2 = du_dr2(&pop, &par, r2);
        prop_assume!(an1.abs() > 1e-3 && an2.abs() > 1e-3);
        prop_assert!((fd1 - an1).abs() / an1.abs() < 1e-6, "r1 {} fd {} an {}", r1, fd1, an1);
        prop_assert!((fd2 - an2).abs() / an2.abs() < 1e-6, "r2 {} fd {} an {}", r2, fd2, an2);

        let fdd1 = central(|x| du_dr1(&pop, &par, x), r1, 1e-4 * r1);
        let fdd2 = central(|x| du_dr2(&pop, &par, x), r2, 1e-4 * r2);
        let d1 = d2u_dr1(&pop, &par, r1);
        let d2 = d2u_dr2(&pop, &par, r2);
        prop_assert!((fdd1 - d1).abs() <= 1e-6 * d1.abs().max(1.0));
        prop_assert!((fdd2 - d2).abs() <= 1e-6 * d2.abs().max(1.0));
        prop_assert!(d2 < 0.0);
    }

    #[test]
    fn legs_are_separable((pop, par) in population_strategy(), a in 0.0f64..1.0, b in 0.0f64..1.0, c in 0.0f64..1.0) {
        let bx = feasible_rate_box(&pop, 100.0).unwrap();
        let r1a = bx.r1_lo + a * (bx.r1_hi - bx.r1_lo);
        let r1b = bx.r1_lo + b * (bx.r1_hi - bx.r1_lo);
        let r2 = bx.r2_lo + c * (bx.r2_hi - bx.r2_lo);
        let r2p = bx.r2_lo + (1.0 - c) * (bx.r2_hi - bx.r2_lo);
        let u = |x: f64, y: f64| induced_server_utility(&pop, &par, &RewardRates::new(x, y).unwrap()).unwrap();
        let diff_a = u(r1a, r2) - u(r1a, r2p);
        let diff_b = u(r1b, r2) - u(r1b, r2p);
        prop_assert!((diff_a - diff_b).abs() < 1e-10 * (1.0 + diff_a.abs()));
    }

    #[test]
    fn newton_and_bisection_find_the_same_root((pop, par) in population_strategy()) {
        let b = feasible_rate_box(&pop, 100.0).unwrap();
        let f = |x: f64| du_dr2(&pop, &par, x);
        prop_assume!(f(b.r2_lo) > 0.0 && f(b.r2_hi) < 0.0);
        let newton = newton_bisect(f, |x| d2u_dr2(&pop, &par, x), b.r2_lo, b.r2_hi).unwrap();
        let plain = bisect(f, b.r2_lo, b.r2_hi, 1e-12).unwrap();
        // Newton stops on the slope, so its location error is about
        // SLOPE_TOL / |f'|.
        prop_assert!(f(newton).abs() < SLOPE_TOL);
        let allowed = SLOPE_TOL / d2u_dr2(&pop, &par, plain).abs() + 1e-9;
        prop_assert!((newton - plain).abs() < allowed, "{} vs {} allowed {}", newton, plain, allowed);
    }

    #[test]
    fn equilibrium_beats_every_grid_rate((pop, par) in population_strategy()) {
        let b = feasible_rate_box(&pop, 100.0).unwrap();
        let eq = compute_equilibrium(&pop, &par, &b).unwrap();
        prop_assert_eq!(eq.strategies.len(), pop.len());
        if !eq.r1_boundary { prop_assert!(eq.foc_residuals.0 < SLOPE_TOL); }
        if !eq.r2_boundary { prop_assert!(eq.foc_residuals.1 < SLOPE_TOL); }
        let grid = GridSpec { rate_points: 30, ..GridSpec::default() };
        let check = verify_server_equilibrium(&pop, &par, &eq.rates, &b, &grid).unwrap();
        prop_assert!(check.stackelberg.passed(), "{:?}", check.stackelberg);
    }
}

#[test]
fn concavity_in_r2_and_counterexamples_in_r1() {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let mut r1_positive = 0;
    for _ in 0..1000 {
        let n = rng.random_range(1..=30);
        let pop: Vec<_> = (0..n)
            .map(|k| {
                profile(
                    k,
                    rng.random_range(1.0..10.0),
                    rng.random_range(0.1..6.0),
                    rng.random_range(1.0..3.0),
                )
            })
            .collect();
        let par = params(n);
        let b = feasible_rate_box(&pop, 100.0).unwrap();
        let r1 = rng.random_range(b.r1_lo..b.r1_hi);
        let r2 = rng.random_range(b.r2_lo..b.r2_hi);
        assert!(d2u_dr2(&pop, &par, r2) < 0.0);
        if d2u_dr1(&pop, &par, r1) > 0.0 {
            r1_positive += 1;
        }
    }
    // Small populations with cheap computation make the r1 leg convex.
    assert!(r1_positive > 0);
}

#[test]
fn client_verification() {
    let p = profile(0, 2.0, 2.0, 1.0);
    let grid = GridSpec::default();
    let rates = RewardRates::new(3.0, 2.0 * std::f64::consts::E).unwrap();
    let check = verify_client_equilibrium(&p, &rates, &grid, 0.1).unwrap();
    assert!(check.passed(), "{check:?}");
    assert_eq!(check.points_checked, 100 * 101 * 3);

    // Outside the per-client range: accuracy clamps high, still optimal
    // within the clamp bounds.
    let high = RewardRates::new(10.0, 1.0).unwrap();
    assert!(verify_client_equilibrium(&p, &high, &grid, 0.1)
        .unwrap()
        .passed());
    let low = RewardRates::new(1.0, 1.0).unwrap();
    assert!(verify_client_equilibrium(&p, &low, &grid, 0.1)
        .unwrap()
        .passed());

    let br = crate::game_core::best_response(&p, &rates).strategy;
    let off = Strategy::new(br.accuracy() + 0.1, br.freshness(), br.completion_time()).unwrap();
    let check = verify_client_strategy(&p, &rates, &off, &grid, 0.1).unwrap();
    assert!(!check.passed());
    let (a, f, t) = check.worst_at;
    assert!((a - br.accuracy()).abs() < 0.01 && (f - br.freshness()).abs() < 0.1 && t == 1.0);
}

#[test]
fn server_verification() {
    let p = [profile(0, 2.0, 1.0, 1.0)];
    let b = feasible_rate_box(&p, 100.0).unwrap();
    let eq = compute_equilibrium(&p, &params(1), &b).unwrap();
    let grid = GridSpec::default();
    let check = verify_server_equilibrium(&p, &params(1), &eq.rates, &b, &grid).unwrap();
    assert!(check.stackelberg.passed(), "{:?}", check.stackelberg);
    assert_eq!(check.stackelberg.points_checked, 2500);
    // With strategies held fixed, utility falls in both rates, so any rate
    // pair below the equilibrium pays less for the same work.
    assert!(!check.frozen.passed());
    assert_eq!(check.frozen.worst_at, (b.r1_lo, b.r2_lo));

    let mid = RewardRates::new(0.5 * (b.r1_lo + b.r1_hi), 0.5 * (b.r2_lo + b.r2_hi)).unwrap();
    let check = verify_server_equilibrium(&p, &params(1), &mid, &b, &grid).unwrap();
    assert!(!check.stackelberg.passed());

    let point = RateBox::point(eq.rates);
    let check = verify_server_equilibrium(&p, &params(1), &eq.rates, &point, &grid).unwrap();
    assert!(check.passed());
}

#[test]
fn population_size_mismatch_is_rejected() {
    let pop = identical(3);
    let b = feasible_rate_box(&pop, 100.0).unwrap();
    assert!(compute_equilibrium(&pop, &params(2), &b).is_err());
    assert!(compute_equilibrium(&[], &params(1), &b).is_err());
}
