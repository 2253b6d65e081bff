use ambddc::driver::RunConfig;
use ambddc::krylov::{pcg, Identity, PcgOptions};
use ambddc::linalg::{mm, SparseLdl, SymSparseMatrix};
use ambddc::mesh::{assemble, build_cube_mesh, poisson_dirichlet_bc, Formulation, MaterialField};
use ambddc::oracle::dense_level;
use ambddc::partition::{partition_box, partition_graph};
use ambddc::precond::{BddcLevel, LevelOptions};
use nalgebra::DMatrix;
use proptest::prelude::*;

/// Random sparse SPD matrix: symmetric off-diagonals, dominant diagonal.
fn spd() -> impl Strategy<Value = SymSparseMatrix> {
    (2usize..40).prop_flat_map(|n| {
        prop::collection::vec((0..n, 0..n, -1.0f64..1.0), 0..4 * n).prop_map(move |entries| {
            let mut t: Vec<(usize, usize, f64)> = Vec::new();
            let mut diag = vec![1.0; n];
            for (i, j, v) in entries {
                if i != j {
                    t.push((i.min(j), i.max(j), v));
                    diag[i] += v.abs();
                    diag[j] += v.abs();
                }
            }
            t.extend(diag.iter().enumerate().map(|(i, &d)| (i, i, d)));
            SymSparseMatrix::from_triangle(n, &t)
        })
    })
}

fn residual(a: &SymSparseMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.mul_vec(x);
    let r: f64 = ax.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    r / nb.max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn sparse_ldl_solves(a in spd(), seed in 0u64..1000) {
        let n = a.n();
        let b: Vec<f64> = (0..n).map(|i| ((i as u64 * 7919 + seed) % 97) as f64 - 48.0).collect();
        let f = SparseLdl::factor_spd(&a).unwrap();
        prop_assert!(residual(&a, &f.solve(&b), &b) < 1e-10);
    }

    #[test]
    fn pcg_agrees_with_direct(a in spd()) {
        let n = a.n();
        let b: Vec<f64> = (0..n).map(|i| 1.0 + i as f64).collect();
        let opts = PcgOptions { rtol: 1e-12, max_iters: 10 * n, ..Default::default() };
        let r = pcg(&a, &Identity(n), &b, opts).unwrap();
        prop_assert!(r.converged);
        let x = SparseLdl::factor_spd(&a).unwrap().solve(&b);
        let err = r.x.iter().zip(&x).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        let scale = x.iter().map(|v| v.abs()).fold(0.0, f64::max);
        prop_assert!(err <= 1e-8 * scale);
        prop_assert!(r.cond >= 1.0 - 1e-12);
    }

    #[test]
    fn matrix_market_round_trip(a in spd()) {
        let mut buf = Vec::new();
        mm::write_sym_matrix(&a, &mut buf).unwrap();
        let back = mm::read_sym_matrix(buf.as_slice()).unwrap();
        prop_assert_eq!(back.to_dense(), a.to_dense());
    }

    #[test]
    fn graph_partition_covers_every_element(n in 2usize..7, parts in 1usize..17) {
        let m = build_cube_mesh(n);
        let mat = MaterialField::uniform(m.n_elements(), 1.0, 0.3);
        let level = assemble(&m, &mat, Formulation::Poisson, &poisson_dirichlet_bc(&m)).unwrap().level;
        let d = partition_graph(&level.element_adjacency(), parts);
        prop_assert_eq!(d.element_sub.len(), m.n_elements());
        prop_assert!(d.n_sub >= parts.min(m.n_elements()));
        let mut sizes = vec![0usize; d.n_sub];
        for &s in &d.element_sub {
            prop_assert!(s < d.n_sub);
            sizes[s] += 1;
        }
        prop_assert!(sizes.iter().all(|&c| c > 0));
    }

    #[test]
    fn averaging_reproduces_continuous_functions(
        k in (1usize..3, 1usize..3, 1usize..3),
        moduli in prop::collection::vec(0.01f64..100.0, 64),
    ) {
        let m = build_cube_mesh(4);
        let mut mat = MaterialField::uniform(64, 1.0, 0.3);
        for (e, v) in moduli.iter().enumerate() {
            mat.per_element[e].e = *v;
        }
        let p = assemble(&m, &mat, Formulation::Poisson, &poisson_dirichlet_bc(&m)).unwrap().level;
        let n = p.n_dofs;
        let l = BddcLevel::prepare(1, p, partition_box([4; 3], [k.0, k.1, k.2]).unwrap(), LevelOptions::default()).unwrap();
        let d = dense_level(&l);
        prop_assert!((&d.e * &d.r - DMatrix::<f64>::identity(n, n)).amax() < 1e-12);
    }

    #[test]
    fn config_survives_text_and_json(
        n in 2usize..40,
        levels in 2usize..5,
        tau in 1.01f64..100.0,
        rtol in 1e-12f64..1e-2,
        seed in any::<u64>(),
        zero in any::<bool>(),
    ) {
        let subs: Vec<String> = (0..levels - 1).map(|i| (1usize << (3 * (levels - 1 - i))).to_string()).collect();
        let text = format!(
            "n = {n}\nlevels = {levels}\nsubdomains = {}\ntau = {tau:?}\nrtol = {rtol:?}\nseed = {seed}  # comment\nedge_zeroing = {zero}\n",
            subs.join("/")
        );
        let mut cfg = RunConfig::default();
        cfg.apply_text(&text).unwrap();
        prop_assert!(cfg.validate().is_ok());
        let a = cfg.adaptive.unwrap();
        prop_assert_eq!(a.tau, tau);
        prop_assert_eq!(a.edge_zeroing, zero);
        prop_assert_eq!(cfg.pcg.rtol, rtol);
        let json = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(back, cfg);
    }
}
