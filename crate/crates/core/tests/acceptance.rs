mod common;

use std::process::ExitCode;
use std::time::Instant;

use bilevel_core::lower::{image_family, ImageFamily, YSet};
use bilevel_core::report::{render_suite, render_symbolic_game, Format};
use bilevel_core::scalar::Scalar;
use bilevel_core::setreal::SetOrder;
use bilevel_core::solutions::{analyze, Concept, ConceptReport};
use bilevel_core::verify::run_goldens;
use bilevel_core::{Instance, RealSet};
use common::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(what())
    }
}

fn solved(file: &str) -> Result<(Instance, ImageFamily<f64>, ConceptReport<f64>), String> {
    let inst = Instance::load(&problem(file)).map_err(|e| format!("{file}: {e}"))?;
    let fam = image_family(&inst).map_err(|e| format!("{file}: {e}"))?;
    let rep = analyze(&inst, &fam).map_err(|e| format!("{file}: {e}"))?;
    Ok((inst, fam, rep))
}

fn xs(rep: &ConceptReport<f64>, idx: &[usize]) -> Vec<f64> {
    let mut v: Vec<f64> = idx.iter().map(|&i| rep.xs[i][0]).collect();
    v.sort_by(f64::total_cmp);
    v
}

fn pairs(rep: &ConceptReport<f64>) -> Vec<(f64, f64)> {
    rep.standard_optimistic.iter().map(|p| (rep.xs[p.index][0], p.y[0])).collect()
}

fn set(text: &str) -> RealSet {
    text.parse().unwrap()
}

fn stackelberg() -> Outcome {
    let start = Instant::now();
    let (_, fam, rep) = solved("stackelberg.blv")?;
    let secs = start.elapsed().as_secs_f64();
    let (alpha, c) = (4.0, 2.0);
    for r in &fam.results {
        let x1 = r.x[0];
        let expect = ((alpha - c - x1) / 2.0).max(0.0);
        let YSet::Points(pts) = &r.psi else { return Err("expected a grid solution set".into()) };
        ensure(!pts.is_empty() && pts.iter().all(|y| (y[0] - expect).abs() <= 1e-3), || {
            format!("psi({x1}) = {pts:?}, closed form {expect}")
        })?;
    }
    ensure(pairs(&rep) == [(1.0, 0.5)], || format!("standard optimistic {:?}", pairs(&rep)))?;
    ensure(xs(&rep, &rep.real_optimistic) == [1.0], || format!("real optimistic {:?}", xs(&rep, &rep.real_optimistic)))?;
    ensure(xs(&rep, &rep.real_pessimistic) == [1.0], || format!("real pessimistic {:?}", xs(&rep, &rep.real_pessimistic)))?;
    ensure(secs < 5.0, || format!("took {secs:.2} s"))?;
    Ok(format!("{} leader points, {secs:.2} s", fam.len()))
}

fn unattained_infimum() -> Outcome {
    let (inst, _, rep) = solved("unattained_infimum.blv")?;
    ensure(rep.f_o.iter().all(|e| e.value == 0.0 && !e.attained), || "F_o is not identically 0".into())?;
    let grid = inst.leader_grid();
    ensure(grid.first().map(|x| x[0]) == Some(0.0) && grid.last().map(|x| x[0]) == Some(1.0), || "grid does not span [0, 1]".into())?;
    ensure(rep.real_optimistic.len() == grid.len(), || "real optimistic is not the whole grid".into())?;
    ensure(rep.standard_optimistic.is_empty(), || "standard optimistic is nonempty".into())?;
    ensure(rep.diagnostics_for(Concept::StandardOptimistic).any(|d| d.message.contains("infimum") && d.message.contains("unattained")), || {
        "missing unattained-infimum diagnostic".into()
    })?;
    Ok(format!("{} leader points", grid.len()))
}

fn floor_closedness() -> Outcome {
    let (_, fam, rep) = solved("floor_closedness.blv")?;
    for r in &fam.results {
        let x = r.x[0];
        let expect = if x < 1.0 {
            set(&format!("({}, {}]", (2.0 * x - 1.0).snap(), x))
        } else {
            set("[-1, 0)")
        };
        ensure(r.image.to_string() == expect.to_string(), || format!("image({x}) = {}, table {expect}", r.image))?;
    }
    ensure(xs(&rep, &rep.real_optimistic) == [0.0, 1.0], || format!("real optimistic {:?}", xs(&rep, &rep.real_optimistic)))?;
    ensure(xs(&rep, &rep.l_minimal) == [1.0], || format!("l-minimal {:?}", xs(&rep, &rep.l_minimal)))?;
    ensure(pairs(&rep) == [(1.0, 0.0)], || format!("standard optimistic {:?}", pairs(&rep)))?;
    let vector: Vec<(f64, f64)> = rep.vector.iter().map(|v| (rep.xs[v.index][0], v.z)).collect();
    ensure(vector == [(1.0, -1.0)], || format!("vector {vector:?}"))?;
    Ok(format!("{} image sets match the table", fam.len()))
}

fn local_contrast() -> Outcome {
    let has_pair = |rep: &ConceptReport<f64>| {
        rep.local_standard_optimistic.iter().any(|p| rep.xs[p.index][0] == 0.0 && p.y[0] == 0.0 && p.radius == Some(0.5))
    };
    let local = |rep: &ConceptReport<f64>, c: Concept| xs(rep, &rep.local_indices(c)).contains(&0.0);
    let (_, _, a) = solved("local_standard_not_real.blv")?;
    ensure(has_pair(&a), || "(0, 0) is not local standard optimistic at radius 1/2 without real".into())?;
    ensure(!local(&a, Concept::RealOptimistic) && !local(&a, Concept::LMinimal), || "0 is local real optimistic or l-minimal".into())?;
    let (_, _, b) = solved("strictness_only_sufficient.blv")?;
    ensure(has_pair(&b), || "(0, 0) is not local standard optimistic at radius 1/2 with real".into())?;
    ensure(local(&b, Concept::RealOptimistic), || "0 is not local real optimistic".into())?;
    Ok("witness radius 1/2 in both, local real optimistic only in the second".into())
}

fn split_image() -> Outcome {
    let (_, fam, rep) = solved("split_image.blv")?;
    let i = fam.position(&[0.0]).ok_or("x = 0 missing from the grid")?;
    ensure(fam.results[i].image == set("[0, 0.25] u [-1, -0.5)"), || format!("image(0) = {}", fam.results[i].image))?;
    ensure(xs(&rep, &rep.real_optimistic) == [-1.0] && xs(&rep, &rep.l_minimal) == [-1.0], || "real optimistic or l-minimal differ from {-1}".into())?;
    let third = 1.0 / 3.0;
    ensure(
        rep.local_standard_optimistic.iter().any(|p| p.index == i && p.y == [0.0] && p.radius.map_or(false, |r| (r - third).abs() < 1e-12)),
        || "(0, 0) is not local standard optimistic at radius 1/3".into(),
    )?;
    for &r in &rep.radii {
        let lro = ConceptReport::local_at(&rep.local_real_optimistic, r);
        let llm = ConceptReport::local_at(&rep.local_l_minimal, r);
        ensure(!lro.contains(&i) && !llm.contains(&i), || format!("0 is local real optimistic or l-minimal at radius {r}"))?;
    }
    Ok(format!("image(0) = {}", fam.results[i].image))
}

fn floor_game() -> Outcome {
    let (inst, fam, rep) = solved("floor_game.blv")?;
    for (x, f) in rep.xs.iter().zip(&rep.f_o) {
        ensure(f.value == (x[0] - 1.0).snap(), || format!("F_o({}) = {}", x[0], f.value))?;
    }
    ensure(xs(&rep, &rep.real_optimistic).contains(&0.0), || "0 is not real optimistic".into())?;
    let report: serde_json::Value = serde_json::from_str(&render_symbolic_game(&inst, &fam, &rep, Format::Json)).map_err(|e| e.to_string())?;
    ensure(report["spne_exists"] == serde_json::Value::Bool(false), || "games report does not state that no equilibrium exists".into())?;
    ensure(rep.standard_optimistic.is_empty(), || "a standard optimistic pair exists".into())?;
    Ok("F_o(x) = x - 1, no equilibrium".into())
}

fn robust_triangle() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for id in 0..200 {
        let text = random_robust(&mut rng, id);
        check_robust(&text).map_err(|e| format!("{e}\n{text}"))?;
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 30.0, || format!("took {secs:.2} s"))?;
    Ok(format!("200 instances, {secs:.2} s"))
}

fn property_suites() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..10_000 {
        let (a, b, c) = (random_set(&mut rng), random_set(&mut rng), random_set(&mut rng));
        for order in [SetOrder::Lower, SetOrder::Upper] {
            ensure(a.leq(&a, order), || format!("{a} not related to itself"))?;
            ensure(!(a.leq(&b, order) && b.leq(&c, order)) || a.leq(&c, order), || format!("transitivity fails for {a}, {b}, {c}"))?;
        }
        ensure(a.leq_l(&b) == b.negate().leq_u(&a.negate()), || format!("duality fails for {a}, {b}"))?;
        ensure(a.leq_l(&b) == oracle_leq_l(&a, &b) && a.leq_u(&b) == oracle_leq_u(&a, &b), || format!("cone inclusion differs for {a}, {b}"))?;
        ensure(!a.leq_l(&b) || a.inf_of().value <= b.inf_of().value, || format!("infimum not monotone for {a}, {b}"))?;
        ensure(!a.leq_u(&b) || a.sup_of().value <= b.sup_of().value, || format!("supremum not monotone for {a}, {b}"))?;
    }
    for id in 0..500 {
        let case = random_finite_problem(&mut rng, id);
        check_finite_case(&case).map_err(|e| format!("{e}\n{}", case.text))?;
    }
    for _ in 0..200 {
        let text = random_game(&mut rng);
        check_game(&text).map_err(|e| format!("{e}\n{text}"))?;
    }
    Ok("10000 set triples, 500 finite instances, 200 game trees".into())
}

fn determinism() -> Outcome {
    let dir = problems_dir();
    let run = |n: usize| -> Result<String, String> {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build().map_err(|e| e.to_string())?;
        pool.install(|| {
            let suite = run_goldens(&dir, &|i: &Instance| Ok(i.clone())).map_err(|e| e.to_string())?;
            Ok(render_suite(&suite, Format::Json))
        })
    };
    let (one, eight) = (run(1)?, run(8)?);
    ensure(one == eight, || "outputs differ between 1 and 8 threads".into())?;
    Ok(format!("{} bytes identical", one.len()))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("Stackelberg duopoly", stackelberg),
        ("unattained infimum", unattained_infimum),
        ("floor closedness table", floor_closedness),
        ("local standard versus local real", local_contrast),
        ("split image at zero", split_image),
        ("floor game", floor_game),
        ("robust triangle", robust_triangle),
        ("property suites", property_suites),
        ("determinism across thread counts", determinism),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(note) => println!("criterion {}: PASS  {name} ({note})", k + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL  {name}: {why}", k + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
