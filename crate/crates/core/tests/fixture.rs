//! Checks on the transcribed 17x17 citing matrix of Adv. Atmos. Sci.
//!
//! Expected numbers here were computed independently with numpy
//! (`np.corrcoef` on the rows, `np.linalg.eigh`, and an SVD-based varimax
//! iteration) and frozen.

use std::path::PathBuf;

use citescope::factors::{self, ComponentCount, FactorModel, FactorOptions};
use citescope::{build_environment, cn_values, parse_matrix, validate_matrix, Direction, MatrixFormat};

const SEED: &str = "Adv. Atmos. Sci.";

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

fn atmos_matrix() -> citescope::CitationMatrix {
    parse_matrix(fixture("table3.csv"), MatrixFormat::DenseCsv).unwrap()
}

#[test]
fn fixture_shape_and_validation() {
    let m = atmos_matrix();
    assert_eq!(m.n_citing(), 17);
    assert_eq!(m.n_cited(), 17);
    assert_eq!(m.count_by_label("Atmos. Environ.", "Atmos. Environ."), 5216);
    // every cited column also appears on the citing axis
    let report = validate_matrix(&m);
    assert!(report.cited_axis_only.is_empty());
    assert!(report.is_empty(), "{report}");
}

#[test]
fn citing_environment_is_the_row_set() {
    let m = atmos_matrix();
    let env = build_environment(&m, SEED, Direction::Citing, 0.01).unwrap();
    let mut members = env.members.clone();
    members.sort();
    let mut rows = m.citing_labels().to_vec();
    rows.sort();
    assert_eq!(members, rows);
}

#[test]
fn high_threshold_leaves_seed_plus_at_most_one_partner() {
    // The seed's largest outflow is 343 of 2206, far below 99%.
    let env = build_environment(&atmos_matrix(), SEED, Direction::Citing, 0.99).unwrap();
    assert!(env.members.len() <= 2);
    assert_eq!(env.members, [SEED]);
}

#[test]
fn citing_shares_sum_to_one() {
    let env = build_environment(&atmos_matrix(), SEED, Direction::Citing, 0.01).unwrap();
    let geo = cn_values(&env).unwrap();
    let sum: f64 = geo.iter().map(|g| g.share_total).sum();
    assert!((sum - 1.0).abs() < 1e-12);
}

fn index(labels: &[String], name: &str) -> usize {
    labels.iter().position(|l| l == name).unwrap()
}

#[test]
fn correlation_spot_checks() {
    let env = build_environment(&atmos_matrix(), SEED, Direction::Citing, 0.01).unwrap();
    let r = factors::correlation_matrix(&env).unwrap();
    let at = |a: &str, b: &str| r[(index(&env.members, a), index(&env.members, b))];
    assert!((at(SEED, "Climate Dynam.") - 0.6400478299696056).abs() < 1e-12);
    assert!((at("Geophys. Res. Lett.", "J. Geophys. Res.") - 0.9663850721576087).abs() < 1e-12);
    assert!((at("Acta Meteorl. Sin.", "Science") - -0.09833170999021454).abs() < 1e-12);
    for k in 0..17 {
        assert_eq!(r[(k, k)], 1.0);
    }
}

const EIGENVALUES: [f64; 17] = [
    9.190381757841088,
    3.1783139931104603,
    1.615346295866031,
    0.9819094481192996,
    0.7899751629893615,
    0.49069321580310477,
    0.3424463163233215,
    0.20502803467475061,
    0.087368252285505,
    0.04760285641863523,
    0.03560073127357427,
    0.02029819771953927,
    0.008755635467994988,
    0.004527373230797939,
    0.001396678064317511,
    0.0003560508122169185,
    0.0,
];

#[test]
fn eigenvalues_match_reference() {
    let env = build_environment(&atmos_matrix(), SEED, Direction::Citing, 0.01).unwrap();
    let r = factors::correlation_matrix(&env).unwrap();
    let eig = factors::symmetric_eigen(&r).unwrap();
    for (got, want) in eig.values.iter().zip(EIGENVALUES) {
        assert!((got - want).abs() < 1e-10, "{got} vs {want}");
    }
    assert!(eig.residual < 1e-10);
}

/// Rotated loadings (Kaiser-normalized varimax, converged to 1e-14) from the
/// reference computation, columns oriented so the largest entry is positive.
const ROTATED: [(&str, [f64; 3]); 17] = [
    ("Acta Meteorl. Sin.", [0.355396, -0.204457, 0.481598]),
    ("Adv. Atmos. Sci.", [0.811318, 0.251896, 0.398026]),
    ("Atmos. Environ.", [-0.296959, 0.573838, 0.266827]),
    ("B. Am. Meteorol. Soc.", [0.826139, 0.477574, 0.177977]),
    ("Bound.-Lay. Meteorol.", [-0.044196, 0.099447, 0.938072]),
    ("Chinese Sci. Bull.", [0.068505, 0.761072, -0.178453]),
    ("Climate Dynam.", [0.497105, 0.547282, 0.440668]),
    ("Geophys. Res. Lett.", [0.233661, 0.822823, 0.284610]),
    ("Int. J. Climatol.", [0.918233, 0.141658, 0.002303]),
    ("J. Appl. Meteorol. Clim.", [0.612699, 0.172828, 0.724212]),
    ("J. Atmos. Sci.", [0.747497, 0.321647, 0.465899]),
    ("J. Climate", [0.408223, 0.867515, 0.050433]),
    ("J. Geophys. Res.", [0.297215, 0.867620, 0.159388]),
    ("J. Meteorol. Sco. Jpn.", [0.724866, 0.021593, 0.640384]),
    ("Mon. Wea. Rev.", [0.906357, 0.252517, 0.221301]),
    ("Q. J. Roy. Meteor. Soc.", [0.478095, 0.127276, 0.832967]),
    ("Science", [0.300637, 0.914372, -0.126899]),
];

#[test]
fn three_component_solution_matches_reference() {
    let env = build_environment(&atmos_matrix(), SEED, Direction::Citing, 0.01).unwrap();
    let options = FactorOptions {
        components: ComponentCount::Fixed(3),
        ..FactorOptions::default()
    };
    let model = FactorModel::fit(&env, &options).unwrap();
    assert!((model.variance_explained_total - 0.8225907086363282).abs() < 1e-10);
    assert!(model.converged);

    // Columns may come out in a different order; match each reference
    // column to the closest model column.
    let l = &model.loadings_rotated;
    let mut used = [false; 3];
    for c in 0..3 {
        let dist = |m: usize| -> f64 {
            ROTATED
                .iter()
                .map(|(name, row)| (l[(index(&model.variables, name), m)] - row[c]).abs())
                .fold(0.0, f64::max)
        };
        let best = (0..3).filter(|&m| !used[m]).min_by(|&a, &b| dist(a).total_cmp(&dist(b))).unwrap();
        used[best] = true;
        assert!(dist(best) < 2e-3, "column {c}: max deviation {}", dist(best));
    }
}

#[test]
fn kaiser_retains_three_on_fixture() {
    let env = build_environment(&atmos_matrix(), SEED, Direction::Citing, 0.01).unwrap();
    let model = FactorModel::fit(&env, &FactorOptions::default()).unwrap();
    assert_eq!(model.components(), 3);
}

#[test]
fn single_component_fit_is_unrotated() {
    let env = build_environment(&atmos_matrix(), SEED, Direction::Citing, 0.01).unwrap();
    let options = FactorOptions {
        components: ComponentCount::Fixed(1),
        ..FactorOptions::default()
    };
    let model = FactorModel::fit(&env, &options).unwrap();
    assert_eq!(model.rotation.shape(), (1, 1));
    assert_eq!(model.rotation[(0, 0)], 1.0);
    assert_eq!(model.loadings_rotated, model.loadings_unrotated);
}

#[test]
fn five_journal_cn_correlation() {
    let total_cites = [144430.0, 52131.0, 20458.0, 28524.0, 15391.0];
    let cn = [40.866908, 16.450265, 11.37804, 8.08881, 7.431376];
    let r = citescope::pearson_r(&total_cites, &cn).unwrap();
    // numpy.corrcoef: 0.9904906159239396
    assert!((r - 0.9904906159239396).abs() < 1e-12);
}

#[test]
fn metadata_fixture_parses() {
    let meta = citescope::parse_metadata(fixture("table1_meta.csv")).unwrap();
    assert_eq!(meta.len(), 5);
    assert_eq!(meta[0].label, "J. Geophys. Res.");
    assert_eq!(meta[0].total_cites, Some(144430));
    assert_eq!(meta[0].impact_factor, Some(3.082));
}
