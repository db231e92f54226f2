use std::f64::consts::PI;
use std::sync::Arc;

use proptest::prelude::*;

use vlasov_stokes::config::{parse_config, SimConfig};
use vlasov_stokes::fluid::{leray_project, relative_divergence, FluidState};
use vlasov_stokes::grid::{make_phase_grid, PhaseGrid, Quadrature, SpatialGrid};
use vlasov_stokes::kinetics::{compute_moment, mass, vlasov_step, DistributionFunction, VlasovOptions};
use vlasov_stokes::snapshot::{decode, encode, FieldKind, Snapshot, SnapshotHeader};

fn small_grid() -> Arc<PhaseGrid> {
    Arc::new(make_phase_grid(1, 8, 2.0 * PI, 8, 4.0).unwrap())
}

fn field(grid: &Arc<PhaseGrid>, values: Vec<f64>) -> DistributionFunction {
    DistributionFunction::from_values(grid.clone(), values, 0.0).unwrap()
}

fn max_abs(a: &[Vec<f64>]) -> f64 {
    a.iter().flatten().fold(0.0, |m, x| m.max(x.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn step_keeps_f_nonnegative(values in prop::collection::vec(0.0f64..1.0, 64), u in -1.5f64..1.5, dt in 1e-3f64..0.1) {
        let grid = small_grid();
        let f = field(&grid, values);
        let fluid = FluidState::constant(grid.spatial.clone(), &[u]);
        let (g, _) = vlasov_step(&f, &fluid, dt, &VlasovOptions::default()).unwrap();
        prop_assert!(g.min_value() >= 0.0);
    }

    #[test]
    fn corrected_step_conserves_mass(values in prop::collection::vec(0.01f64..1.0, 64), u in -1.5f64..1.5, dt in 1e-3f64..0.1) {
        let grid = small_grid();
        let f = field(&grid, values);
        let fluid = FluidState::constant(grid.spatial.clone(), &[u]);
        let opts = VlasovOptions { conservative_correction: true, ..VlasovOptions::default() };
        let (g, _) = vlasov_step(&f, &fluid, dt, &opts).unwrap();
        let (m0, m1) = (mass(&f), mass(&g));
        prop_assert!((m1 - m0).abs() <= 1e-12 * m0);
    }

    #[test]
    fn moments_are_linear(a in prop::collection::vec(-1.0f64..1.0, 64), b in prop::collection::vec(-1.0f64..1.0, 64),
                          s in -3.0f64..3.0, k in 0u32..5) {
        let grid = small_grid();
        let mixed: Vec<f64> = a.iter().zip(&b).map(|(x, y)| s * x + y).collect();
        let ma = compute_moment(&field(&grid, a), k as f64).unwrap();
        let mb = compute_moment(&field(&grid, b), k as f64).unwrap();
        let mm = compute_moment(&field(&grid, mixed), k as f64).unwrap();
        let scale = 1.0 + ma.iter().chain(&mb).fold(0.0f64, |m, x| m.max(x.abs()));
        for i in 0..mm.len() {
            prop_assert!((mm[i] - (s * ma[i] + mb[i])).abs() <= 1e-12 * scale * (1.0 + s.abs()));
        }
    }

    #[test]
    fn leray_is_idempotent_and_solenoidal(w in prop::collection::vec(-1.0f64..1.0, 128)) {
        let grid = SpatialGrid::new(2, 8, 2.0 * PI).unwrap();
        let w = vec![w[..64].to_vec(), w[64..].to_vec()];
        let p1 = leray_project(&grid, &w);
        let p2 = leray_project(&grid, &p1);
        let diff: Vec<Vec<f64>> = p1.iter().zip(&p2).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x - y).collect()).collect();
        prop_assert!(max_abs(&diff) <= 1e-12 * max_abs(&p1).max(1e-300));
        prop_assert!(relative_divergence(&grid, &p1) < 1e-12);
    }

    #[test]
    fn snapshot_round_trip(d in 1usize..=2, n_x in 1usize..4, n_v in 1usize..4, trapezoid: bool,
                           kind in 0usize..3, time in -1e3f64..1e3, seed in any::<u64>()) {
        let kind = [FieldKind::Distribution, FieldKind::Velocity, FieldKind::Pressure][kind];
        let header = SnapshotHeader {
            d, n_x, n_v, length: 2.0 * PI, v_max: 5.5,
            quadrature: if trapezoid { Quadrature::Trapezoid } else { Quadrature::Midpoint },
            time, kind,
            components: if kind == FieldKind::Velocity { d } else { 1 },
        };
        let len = header.expected_len().unwrap();
        let data = (0..len as u64).map(|i| f64::from_bits(seed.rotate_left(i as u32 % 64) ^ i)).collect();
        let s = Snapshot { header, data };
        let back = decode(&encode(&s).unwrap()).unwrap();
        prop_assert!(s.bit_eq(&back));
    }

    #[test]
    fn decode_rejects_without_panicking(bytes in prop::collection::vec(any::<u8>(), 0..256)) {
        let _ = decode(&bytes);
    }

    #[test]
    fn config_text_round_trip(dt in 1e-4f64..1e-2, nu_scale in 0.1f64..10.0, stride in 1usize..500, log_n in 3u32..7) {
        let mut cfg = SimConfig::default();
        cfg.time.dt = dt;
        cfg.output.stride = stride;
        cfg.grid.n_x = 1 << log_n;
        cfg.diag.c0 *= nu_scale;
        prop_assert_eq!(parse_config(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn config_parser_total(text in "\\PC{0,200}") {
        let _ = parse_config(&text);
    }
}
