mod common;

use bilevel_core::report::{render_suite, Format};
use bilevel_core::verify::{run_goldens, FileVerdict};
use bilevel_core::Instance;
use common::problems_dir;

fn identity(i: &Instance) -> Result<Instance, bilevel_core::model::ModelError> {
    Ok(i.clone())
}

#[test]
fn every_fixture_passes_goldens_and_matrix() {
    let suite = run_goldens(&problems_dir(), &identity).unwrap();
    assert!(suite.files.len() >= 10);
    for f in &suite.files {
        match &f.verdict {
            FileVerdict::Bilevel { matrix, goldens } => {
                let failed: Vec<_> = goldens.iter().filter(|g| !g.passed).map(|g| (&g.statement, &g.actual)).collect();
                assert!(failed.is_empty(), "{}: {failed:?}", f.path.display());
                assert!(matrix.is_clean(), "{}: {:?}", f.path.display(), matrix.violations().collect::<Vec<_>>());
            }
            FileVerdict::Error(e) => panic!("{}: {e}", f.path.display()),
            _ => assert!(f.passed(), "{}", f.path.display()),
        }
    }
}

#[test]
fn suite_report_is_independent_of_thread_count() {
    let dir = problems_dir();
    let run = |n: usize| {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
        pool.install(|| render_suite(&run_goldens(&dir, &identity).unwrap(), Format::Json))
    };
    assert_eq!(run(1), run(4));
}

#[test]
fn a_wrong_golden_is_reported() {
    let text = common::problem("split_image.blv").replace("real_optimistic == {-1}", "real_optimistic == {1}");
    let inst = Instance::load(&text).unwrap();
    let (_, goldens) = bilevel_core::verify::verify_instance(&inst).unwrap();
    let bad: Vec<_> = goldens.iter().filter(|g| !g.passed).collect();
    assert_eq!(bad.len(), 1);
    assert_eq!(bad[0].actual.as_deref(), Some("{-1}"));
}
