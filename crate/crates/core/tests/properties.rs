use nalgebra::DMatrix;
use proptest::prelude::*;

use citescope::export::render_matrix_csv;
use citescope::factors::{self, ComponentCount, FactorModel, FactorOptions};
use citescope::ingest::{parse_matrix_str, MatrixFormat};
use citescope::simgraph::{build_graph, cosine, similarity_matrix, DiagonalPolicy};
use citescope::{build_environment, cn_values, pearson_r, CitationMatrix, Direction};

fn labels(n: usize, prefix: &str) -> Vec<String> {
    (0..n).map(|i| format!("{prefix}{i}")).collect()
}

prop_compose! {
    fn square_matrix(max: usize)(n in 2..=max)(
        counts in prop::collection::vec(prop::collection::vec(0u64..50, n), n)
    ) -> CitationMatrix {
        let n = counts.len();
        CitationMatrix::new(labels(n, "J"), labels(n, "J"), counts).unwrap()
    }
}

prop_compose! {
    fn rect_matrix()(r in 1usize..6, c in 1usize..6)(
        counts in prop::collection::vec(prop::collection::vec(0u64..1000, c), r)
    ) -> CitationMatrix {
        let (r, c) = (counts.len(), counts[0].len());
        CitationMatrix::new(labels(r, "R"), labels(c, "C"), counts).unwrap()
    }
}

fn to_edge_list(m: &CitationMatrix) -> String {
    let mut s = String::from("citing,cited,count\n");
    for (i, a) in m.citing_labels().iter().enumerate() {
        for (j, b) in m.cited_labels().iter().enumerate() {
            s.push_str(&format!("{a},{b},{}\n", m.count(i, j)));
        }
    }
    s
}

fn symmetric_unit_diag(p: usize, entries: &[f64]) -> DMatrix<f64> {
    // Gram matrix of random vectors, rescaled to unit diagonal: a valid
    // correlation matrix.
    let x = DMatrix::from_row_slice(p, entries.len() / p, entries);
    let g = &x * x.transpose();
    DMatrix::from_fn(p, p, |i, j| {
        if i == j {
            1.0
        } else {
            g[(i, j)] / (g[(i, i)] * g[(j, j)]).sqrt()
        }
    })
}

proptest! {
    #[test]
    fn dense_csv_round_trip(m in rect_matrix()) {
        let text = render_matrix_csv(&m);
        let back = parse_matrix_str(&text, MatrixFormat::DenseCsv).unwrap();
        prop_assert_eq!(&back, &m);
        prop_assert_eq!(render_matrix_csv(&back), text);
    }

    #[test]
    fn edge_list_equals_dense(m in rect_matrix()) {
        let from_edges = parse_matrix_str(&to_edge_list(&m), MatrixFormat::EdgeListCsv).unwrap();
        prop_assert_eq!(from_edges, m);
    }

    #[test]
    fn threshold_monotone_and_seed_kept(m in square_matrix(8), t1 in 0.0f64..0.99, t2 in 0.0f64..0.99) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let seed = "J0";
        match build_environment(&m, seed, Direction::Cited, lo) {
            Ok(wide) => {
                let narrow = build_environment(&m, seed, Direction::Cited, hi).unwrap();
                prop_assert!(narrow.members.iter().all(|x| wide.members.contains(x)));
                prop_assert!(narrow.members.iter().any(|x| x == seed));
                let zero = build_environment(&m, seed, Direction::Cited, 0.0).unwrap();
                prop_assert!(wide.members.iter().all(|x| zero.members.contains(x)));
            }
            Err(_) => prop_assert_eq!(m.column(0).sum::<u64>(), 0),
        }
    }

    #[test]
    fn direction_duality(m in square_matrix(7), t in 0.0f64..0.5) {
        let a = build_environment(&m, "J1", Direction::Cited, t);
        let b = build_environment(&m.transpose(), "J1", Direction::Citing, t);
        match (a, b) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a.members, b.members),
            (Err(_), Err(_)) => {}
            _ => prop_assert!(false, "one direction failed"),
        }
    }

    #[test]
    fn shares_normalized(m in square_matrix(8), t in 0.0f64..0.3, cited in any::<bool>()) {
        let dir = if cited { Direction::Cited } else { Direction::Citing };
        if let Ok(env) = build_environment(&m, "J0", dir, t) {
            if let Ok(geo) = cn_values(&env) {
                let sum: f64 = geo.iter().map(|g| g.share_total).sum();
                prop_assert!((sum - 1.0).abs() < 1e-9);
                for g in &geo {
                    prop_assert!(0.0 <= g.share_excl_self && g.share_excl_self <= g.share_total);
                    prop_assert!(g.share_total <= 1.0);
                }
            }
        }
    }

    #[test]
    fn pearson_symmetric_and_affine_invariant(
        x in prop::collection::vec(-100.0f64..100.0, 3..20),
        a in 0.1f64..10.0,
        b in -50.0f64..50.0,
    ) {
        let y: Vec<f64> = x.iter().enumerate().map(|(i, v)| v.sin() * 10.0 + i as f64).collect();
        if let Ok(r) = pearson_r(&x, &y) {
            prop_assert!((r - pearson_r(&y, &x).unwrap()).abs() < 1e-12);
            let xt: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            prop_assert!((r - pearson_r(&xt, &y).unwrap()).abs() < 1e-12);
            prop_assert!((-1.0..=1.0).contains(&r));
        }
    }

    #[test]
    fn cosine_range_and_scale(
        u in prop::collection::vec(0.0f64..100.0, 1..12),
        alpha in 0.01f64..100.0,
    ) {
        let v: Vec<f64> = u.iter().rev().cloned().collect();
        let c = cosine(&u, &v).unwrap();
        prop_assert!((0.0..=1.0).contains(&c));
        let scaled: Vec<f64> = u.iter().map(|x| alpha * x).collect();
        prop_assert!((cosine(&scaled, &v).unwrap() - c).abs() < 1e-12);
        if u.iter().any(|&x| x > 0.0) {
            prop_assert!((cosine(&u, &u).unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn edges_monotone_in_suppression(m in square_matrix(8), s1 in 0.0f64..1.0, s2 in 0.0f64..1.0) {
        let (lo, hi) = if s1 <= s2 { (s1, s2) } else { (s2, s1) };
        if let Ok(env) = build_environment(&m, "J0", Direction::Citing, 0.0) {
            if let Ok(geo) = cn_values(&env) {
                let sim = similarity_matrix(&env, DiagonalPolicy::IncludeSelfCites);
                let many = build_graph(&env, &sim, &geo, lo).unwrap();
                let few = build_graph(&env, &sim, &geo, hi).unwrap();
                prop_assert!(few.edges.iter().all(|e| many.edges.contains(e)));
                prop_assert!(few.edges.iter().all(|e| e.cosine >= hi && e.source < e.target));
            }
        }
    }

    #[test]
    fn eigen_reconstruction_and_orthonormality(p in 2usize..10, seed in prop::collection::vec(-1.0f64..1.0, 200)) {
        let r = symmetric_unit_diag(p, &seed[..p * (200 / p).min(20)]);
        let eig = factors::symmetric_eigen(&r).unwrap();
        let v = &eig.vectors;
        let vtv = v.transpose() * v;
        prop_assert!((vtv - DMatrix::identity(p, p)).amax() < 1e-10);
        prop_assert!((eig.values.iter().sum::<f64>() - p as f64).abs() < 1e-8);

        let ex = factors::principal_components(&r, ComponentCount::Fixed(p)).unwrap();
        let rebuilt = &ex.loadings * ex.loadings.transpose();
        prop_assert!((rebuilt - &r).amax() < 1e-8);
    }

    #[test]
    fn factor_permutation_equivariance(m in square_matrix(7), shift in 1usize..6) {
        let n = m.n_citing();
        prop_assume!(n >= 3);
        let rows: Vec<Vec<f64>> = m.rows().map(|r| r.iter().map(|&c| c as f64).collect()).collect();
        let names = m.citing_labels().to_vec();
        let Ok(corr) = factors::correlation_of_rows(&names, &rows) else { return Ok(()); };
        let perm: Vec<usize> = (0..n).map(|i| (i + shift) % n).collect();
        let prow: Vec<Vec<f64>> = perm.iter().map(|&i| rows[i].clone()).collect();
        let pnames: Vec<String> = perm.iter().map(|&i| names[i].clone()).collect();
        let pcorr = factors::correlation_of_rows(&pnames, &prow).unwrap();

        let opts = FactorOptions { components: ComponentCount::Fixed(2), tolerance: 1e-12, max_iterations: 500, ..FactorOptions::default() };
        let (Ok(a), Ok(b)) = (
            FactorModel::from_correlation(names.clone(), corr, &opts),
            FactorModel::from_correlation(pnames, pcorr, &opts),
        ) else { return Ok(()); };
        // Degenerate spectra make the eigenvectors non-unique; skip them.
        let ev = &a.eigenvalues;
        prop_assume!((ev[1] - ev[2]).abs() > 1e-3 && (ev[0] - ev[1]).abs() > 1e-3);
        // Compare communalities, which do not depend on column order or sign.
        for (k, &src) in perm.iter().enumerate() {
            let ha: f64 = a.loadings_rotated.row(src).norm_squared();
            let hb: f64 = b.loadings_rotated.row(k).norm_squared();
            prop_assert!((ha - hb).abs() < 1e-8);
        }
        // Unrotated loadings, oriented by the largest entry, agree row for row
        // unless the largest entry is tied.
        for c in 0..2 {
            for (k, &src) in perm.iter().enumerate() {
                let x = a.loadings_unrotated[(src, c)].abs();
                let y = b.loadings_unrotated[(k, c)].abs();
                prop_assert!((x - y).abs() < 1e-6);
            }
        }
    }
}
