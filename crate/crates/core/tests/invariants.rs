//! Property tests for the structural invariants of each module.

use proptest::prelude::*;
use replab_core::band::{norm2, C64};
use replab_core::classical::integrate_orbit;
use replab_core::config::Config;
use replab_core::geometry::{build_geometry, epsilon_prime, h_positivity_slack, smooth_cutoff, theta_at, theta_weight, CutoffSpec};
use replab_core::grid::Grid;
use replab_core::model::{build_hamiltonian, select_r_lambda, PotentialSpec};
use replab_core::operators::{build_phases_signed, PhaseSign};
use replab_core::resolvent::{besov_bound_sweep, solve, Problem};
use replab_core::spaces::DyadicDecomposition;
use replab_core::HamiltonianOptions;

fn cases(n: u32) -> ProptestConfig {
    ProptestConfig::with_cases(n)
}

fn vector(n: usize, seed: u64) -> Vec<C64> {
    (0..n)
        .map(|i| {
            let t = (i as f64 + 1.0) * (seed as f64 * 0.618 + 0.3);
            C64::new(t.sin(), (1.7 * t).cos())
        })
        .collect()
}

proptest! {
    #![proptest_config(cases(64))]

    #[test]
    fn cutoff_is_one_then_zero_and_non_increasing(a in -1.0f64..3.0, b in -1.0f64..3.0) {
        let spec = CutoffSpec::default();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(smooth_cutoff(lo, &spec) >= smooth_cutoff(hi, &spec));
        if lo <= spec.t_lo {
            prop_assert_eq!(smooth_cutoff(lo, &spec), 1.0);
        }
        if hi >= spec.t_hi {
            prop_assert_eq!(smooth_cutoff(hi, &spec), 0.0);
        }
    }

    #[test]
    fn theta_matches_closed_form(f in 1.0f64..1e4, nu in 0usize..12, delta in 0.05f64..1.0) {
        let r_nu = 2f64.powi(nu as i32);
        let [t, t1, _, _] = theta_at(f, r_nu, delta);
        let want = (1.0 - (1.0 + f / r_nu).powf(-delta)) / delta;
        let want1 = (1.0 + f / r_nu).powf(-1.0 - delta) / r_nu;
        prop_assert!((t - want).abs() <= 1e-12 * want.max(1.0));
        prop_assert!((t1 - want1).abs() <= 1e-12 * want1);
        prop_assert!(t <= f / r_nu * (1.0 + 1e-12) && t1 <= t / f * (1.0 + 1e-12));
    }

    #[test]
    fn critical_exponent_is_the_minimum(eps in 0.1f64..2.0, rho in 0.1f64..2.0, tau in 0.1f64..2.0) {
        let spec = PotentialSpec::new(eps, 1, 0, "0", "0", rho, Some(tau)).unwrap();
        let want = rho.min(epsilon_prime(eps)).min(tau).min(1.0 + eps / 2.0);
        prop_assert!((spec.beta_c() - want).abs() < 1e-14);
    }

    #[test]
    fn classical_energy_is_conserved(x0 in 0.5f64..2.0, p0 in 0.0f64..1.0, eps in 0.5f64..2.0) {
        let tr = integrate_orbit(&[x0], &[p0], eps, 5.0, 1e-3).unwrap();
        prop_assert!(tr.energy_drift < 1e-5, "drift {}", tr.energy_drift);
    }
}

proptest! {
    #![proptest_config(cases(16))]

    #[test]
    fn geometry_fields_satisfy_pointwise_identities(eps in 0.25f64..2.0, radial in any::<bool>()) {
        let grid = if radial { Grid::radial(3, 1.0 / 16.0, 40.0) } else { Grid::line(1.0 / 16.0, 40.0) }.unwrap();
        let g = build_geometry(&grid, eps, 1.0).unwrap();
        for i in 0..g.len() {
            prop_assert!(g.r[i] >= 1.0 && g.f[i] >= 1.0);
            let want = g.r[i].powf(-eps / 2.0) * g.grad_r[i];
            prop_assert!((g.grad_f[i] - want).abs() <= 1e-12 * want.abs().max(1.0));
            if g.r[i] >= 2.0 {
                prop_assert!((g.grad_r[i].abs() - 1.0).abs() < 1e-12);
            }
        }
        prop_assert!(h_positivity_slack(&g) >= 0.0);
    }

    #[test]
    fn theta_bounds_hold_on_the_grid(eps in 0.25f64..2.0, nu in 0usize..6, delta in 0.05f64..1.0) {
        let g = build_geometry(&Grid::line(1.0 / 16.0, 200.0).unwrap(), eps, 1.0).unwrap();
        let nu = nu.min(g.nu_max());
        let w = theta_weight(&g, nu, delta);
        prop_assert_eq!(w.r_nu, 2f64.powi(nu as i32));
        prop_assert!(w.bounds.all_hold(), "{:?}", w.bounds);
    }

    #[test]
    fn dyadic_rings_are_disjoint_and_dyadic(eps in 0.25f64..2.0) {
        let g = build_geometry(&Grid::line(1.0 / 16.0, 120.0).unwrap(), eps, 1.0).unwrap();
        for d in [DyadicDecomposition::f_based(&g), DyadicDecomposition::r_based(&g)] {
            let mut seen = vec![false; g.len()];
            for (nu, ring) in d.rings.iter().enumerate() {
                prop_assert_eq!(d.radii[nu], 2f64.powi(nu as i32));
                for &i in ring {
                    prop_assert!(!seen[i]);
                    seen[i] = true;
                }
            }
            prop_assert!(!d.rings[0].is_empty());
        }
    }

    #[test]
    fn dirichlet_hamiltonian_is_real_symmetric(eps in 0.25f64..2.0, amp in -1.0f64..1.0) {
        let q1 = format!("{amp}*r^epsilon/f");
        let spec = PotentialSpec::new(eps, 1, 0, &q1, "0.5*f^(-2)*sin(r)", 1.0, Some(1.0)).unwrap();
        let g = build_geometry(&Grid::line(1.0 / 32.0, 15.0).unwrap(), eps, 1.0).unwrap();
        let h = build_hamiltonian(&spec, &g).unwrap();
        prop_assert!(h.matrix.lower_bandwidth() <= 2 && h.matrix.upper_bandwidth() <= 2);
        prop_assert_eq!(h.matrix.symmetry_defect(), 0.0);
        prop_assert_eq!(h.matrix.hermiticity_defect(), 0.0);
    }

    #[test]
    fn phase_conjugation_flips_the_sign(lambda in 0.6f64..1.9, gamma in 1e-4f64..0.5) {
        let spec = PotentialSpec::reference();
        let g = build_geometry(&Grid::line(1.0 / 8.0, 100.0).unwrap(), 1.0, 1.0).unwrap();
        let rl = select_r_lambda(&spec, lambda, &g).unwrap();
        let z = C64::new(lambda, gamma);
        let up = build_phases_signed(z, PhaseSign::Upper, &spec, &g, rl).unwrap();
        let down = build_phases_signed(z.conj(), PhaseSign::Lower, &spec, &g, rl).unwrap();
        for (a, b) in up.a.iter().zip(&down.a) {
            prop_assert!((a.conj() - b).norm() <= 1e-12 * a.norm().max(1.0));
        }
        prop_assert!(up.bounds.hold() && down.bounds.hold());
    }

    #[test]
    fn resolvent_commutes_with_conjugation(lambda in 0.6f64..1.9, gamma in 1e-3f64..0.5, seed in 0u64..1000) {
        let p = Problem::new(PotentialSpec::reference(), &Grid::line(0.1, 19.0).unwrap(), &HamiltonianOptions::default()).unwrap();
        let psi = vector(p.len(), seed);
        let z = C64::new(lambda, gamma);
        let u = solve(&p.hamiltonian, z, &psi).unwrap();
        let conj_psi: Vec<C64> = psi.iter().map(|v| v.conj()).collect();
        let w = solve(&p.hamiltonian, z.conj(), &conj_psi).unwrap();
        let d: Vec<C64> = u.iter().zip(&w).map(|(a, b)| a.conj() - b).collect();
        prop_assert!(norm2(&d) <= 1e-10 * norm2(&u));
    }

    #[test]
    fn bound_ratio_is_scale_invariant(t in 0.01f64..100.0, seed in 0u64..1000) {
        let p = Problem::new(PotentialSpec::reference(), &Grid::line(0.1, 19.0).unwrap(), &HamiltonianOptions::default()).unwrap();
        let psi = vector(p.len(), seed);
        let scaled: Vec<C64> = psi.iter().map(|v| v * t).collect();
        let g = [1e-1, 1e-2];
        let a = besov_bound_sweep(&p, 1.0, &g, PhaseSign::Upper, (0.5, 2.0), "v", &psi).unwrap();
        let b = besov_bound_sweep(&p, 1.0, &g, PhaseSign::Upper, (0.5, 2.0), "v", &scaled).unwrap();
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x.bound_ratio / y.bound_ratio - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn config_round_trips_through_toml(eps in 0.25f64..2.0, k in 3i32..8, f_max in 4.0f64..64.0, seed in 0u64..(i64::MAX as u64)) {
        let mut cfg = Config::reference();
        cfg.model.epsilon = eps;
        cfg.grid.spacing = 2f64.powi(-k);
        cfg.grid.f_max = Some(f_max);
        cfg.seed = seed;
        let text = toml::to_string(&cfg).unwrap();
        prop_assert_eq!(Config::parse(&text).unwrap(), cfg);
    }
}
