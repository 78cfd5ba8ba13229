mod common;

use bilevel_core::lower::image_family;
use bilevel_core::model::BilevelInstance;
use bilevel_core::scalar::{fmt_scalar, Scalar};
use bilevel_core::solutions::{analyze, ConceptReport};
use bilevel_core::verify::run_matrix;

fn leaders<S: Scalar>(file: &str) -> (Vec<Vec<f64>>, Vec<(f64, f64)>) {
    let inst = BilevelInstance::<S>::load(&common::problem(file)).unwrap();
    let fam = image_family(&inst).unwrap();
    let rep: ConceptReport<S> = analyze(&inst, &fam).unwrap();
    assert!(run_matrix(&inst, &fam, &rep).is_clean());
    let wide = |v: S| fmt_scalar(v).parse::<f64>().unwrap();
    let x = |i: usize| wide(rep.xs[i][0]);
    let sets = [&rep.real_optimistic, &rep.real_pessimistic, &rep.l_minimal, &rep.u_minimal];
    let so = rep.standard_optimistic.iter().map(|p| (x(p.index), wide(p.y[0]))).collect();
    (sets.iter().map(|s| s.iter().map(|&i| x(i)).collect()).collect(), so)
}

#[test]
fn f32_and_f64_agree_on_the_shipped_examples() {
    for file in ["split_image.blv", "floor_closedness.blv", "local_standard_not_real.blv", "floor_game.blv"] {
        assert_eq!(leaders::<f32>(file), leaders::<f64>(file), "{file}");
    }
}
