use nalgebra::DVector;
use partflux::cli::{load_operator, operator_from_bytes, operator_to_bytes, save_operator};
use partflux::mesh::DomainSpec;
use partflux::scenarios::{gaussian_training_set, GaussianFamily, PatchScenario};
use partflux::solvers::{CoupledProblem, RunOptions};
use partflux::surrogate::{simulate_training, train_flux_operator, DmdFluxOperator, TrainingOptions};
use partflux::Error;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn trained() -> DmdFluxOperator {
    let spec = DomainSpec::new(8).unwrap();
    let problem = CoupledProblem::new(spec, std::sync::Arc::new(PatchScenario::new(1e-3, 2e-3).unwrap())).unwrap();
    let options = TrainingOptions {
        k_patch: 2,
        run: RunOptions {
            dt: 0.05,
            init: Default::default(),
        },
    };
    let snap = simulate_training(&problem, &gaussian_training_set(spec, GaussianFamily::default()), options).unwrap();
    train_flux_operator(&snap, 1e-10, [1e-3, 2e-3]).unwrap()
}

#[test]
fn save_load_resave_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let op = trained();
    let first = dir.path().join("a.dmdf");
    let second = dir.path().join("b.dmdf");
    save_operator(&op, &first).unwrap();
    let loaded = load_operator(&first).unwrap();
    assert_eq!(loaded, op);
    save_operator(&loaded, &second).unwrap();
    assert_eq!(std::fs::read(&first).unwrap(), std::fs::read(&second).unwrap());
}

#[test]
fn dense_and_factored_files_agree() {
    let op = trained();
    let factored = operator_from_bytes(&operator_to_bytes(&op)).unwrap();
    let dense = operator_from_bytes(&operator_to_bytes(&op.densified())).unwrap();
    assert!(factored.is_factored() && !dense.is_factored());
    let mut rng = StdRng::seed_from_u64(11);
    for _ in 0..20 {
        let y: Vec<f64> = (0..op.layout().n_fs()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let a: DVector<f64> = factored.apply(&y).unwrap();
        let b = dense.apply(&y).unwrap();
        assert!((&a - &b).norm() <= 1e-12 * b.norm());
    }
}

#[test]
fn corrupted_files_report_their_class() {
    let mut bytes = operator_to_bytes(&trained());
    bytes[1] = b'X';
    let err = operator_from_bytes(&bytes).unwrap_err();
    assert_eq!(err.to_string(), "not an operator file");
    assert_eq!(err.class(), "format");
    let good = operator_to_bytes(&trained());
    let err = operator_from_bytes(&good[..good.len() / 2]).unwrap_err();
    assert!(matches!(err, Error::Truncated));
}
