// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// non-zero if any required criterion fails. Criterion 8 depends on how
// faithful the bundled six-bus dataset is, so it is reported but not enforced.

mod common;

use std::collections::BTreeSet;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lattice_reliability::corpus::{corpus, CorpusSystem};
use lattice_reliability::dcopf::{apply_state, build_shed_lp, min_load_shed};
use lattice_reliability::partition::choose_order;
use lattice_reliability::system::Model;
use lattice_reliability::{
    brute_force_oracle, bundled, enumerate_assess, monte_carlo_assess, partition_by_level1,
    partition_by_level2, ColumnOrder, ComponentReliability, Criteria, Csilp, Lattice, McsSettings,
    OracleResult, PartitionResult, Report, SystemState,
};

const CORPUS_SIZE: usize = 200;
const STRETCH: &[usize] = &[8];

type Outcome = Result<String, String>;
type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn state(n: usize, ids: &[usize]) -> SystemState {
    SystemState::from_ids(n, ids.iter().copied()).unwrap()
}

fn lattice(n: usize, lo: &[usize], hi: &[usize]) -> Lattice {
    Lattice::new(state(n, lo), state(n, hi)).unwrap()
}

fn sorted(cells: impl IntoIterator<Item = Lattice>) -> Vec<Lattice> {
    let mut v: Vec<Lattice> = cells.into_iter().collect();
    v.sort_by(|a, b| (a.lower(), a.upper()).cmp(&(b.lower(), b.upper())));
    v
}

fn worked_example() -> Outcome {
    let t0 = Instant::now();
    let sys = bundled("sys5").unwrap();
    let run = Csilp::new(sys.evaluator(), &sys.reliability)
        .criteria(Criteria::max_level(5))
        .run()
        .map_err(|e| e.to_string())?;
    let elapsed = t0.elapsed();
    let n = 5;
    let want_critical = [
        state(n, &[1]),
        state(n, &[2, 3]),
        state(n, &[3, 4]),
        state(n, &[2, 4, 5]),
    ];
    ensure(run.critical.members() == want_critical, || {
        format!("critical set {:?}", run.critical.members())
    })?;
    let failures = sorted(
        run.ledger
            .failure_lattices
            .iter()
            .map(|e| e.lattice.clone()),
    );
    let want_failures = sorted([
        lattice(n, &[1], &[1, 2, 3, 4, 5]),
        lattice(n, &[2, 3], &[2, 3, 4, 5]),
        lattice(n, &[3, 4], &[3, 4, 5]),
        lattice(n, &[2, 4, 5], &[2, 4, 5]),
    ]);
    ensure(failures == want_failures, || {
        format!("failure lattices {failures:?}")
    })?;
    let normals = sorted(run.ledger.normal_cells.iter().cloned());
    let want_normals = sorted([
        lattice(n, &[3], &[3, 5]),
        lattice(n, &[], &[4, 5]),
        lattice(n, &[2, 4], &[2, 4]),
        lattice(n, &[2], &[2, 5]),
    ]);
    ensure(normals == want_normals, || {
        format!("normal cells {normals:?}")
    })?;
    ensure(run.ledger.frontier.is_empty(), || {
        "frontier not empty".into()
    })?;
    ensure(run.evaluations == 12, || {
        format!("{} evaluations", run.evaluations)
    })?;
    ensure(elapsed < Duration::from_secs(1), || {
        format!("took {elapsed:?}")
    })?;

    let out = common::latrel(&["assess", "--system", "sys5", "--k-max", "5"]);
    ensure(out.status.success(), || {
        format!("cli exit {:?}", out.status)
    })?;
    let report = Report::from_json(&String::from_utf8_lossy(&out.stdout), "stdout")
        .map_err(|e| e.to_string())?;
    let records = report.critical_records.as_ref().map_or(0, Vec::len);
    ensure(report.evaluation_count == 12 && records == 4, || {
        format!(
            "cli report: {} evaluations, {records} records",
            report.evaluation_count
        )
    })?;
    Ok(format!(
        "4 critical states, 4 + 4 cells, 12 evaluations, LOLP {:.5}, {:.1} ms",
        run.lolp(),
        elapsed.as_secs_f64() * 1e3
    ))
}

fn oracles(systems: &[CorpusSystem]) -> Vec<OracleResult> {
    systems
        .iter()
        .map(|s| brute_force_oracle(&s.evaluator, &s.reliability, 1).unwrap())
        .collect()
}

fn as_set(states: &[SystemState]) -> BTreeSet<SystemState> {
    states.iter().cloned().collect()
}

fn oracle_equivalence(systems: &[CorpusSystem], truth: &[OracleResult]) -> Outcome {
    let t0 = Instant::now();
    let mut worst = 0.0f64;
    for (s, o) in systems.iter().zip(truth) {
        let n = s.components();
        let run = Csilp::new(&s.evaluator, &s.reliability)
            .criteria(Criteria::max_level(n))
            .run()
            .map_err(|e| format!("{}: {e}", s.name()))?;
        let err = (run.lolp() - o.lolp_exact).abs();
        worst = worst.max(err);
        ensure(err <= 1e-12, || {
            format!("{}: LOLP off by {err:e}", s.name())
        })?;
        ensure(
            as_set(run.critical.members()) == as_set(&o.minimal_cut_sets),
            || format!("{}: critical set differs", s.name()),
        )?;
    }
    let elapsed = t0.elapsed();
    ensure(elapsed < Duration::from_secs(120), || {
        format!("took {elapsed:?}")
    })?;
    Ok(format!(
        "{} systems, max |error| {worst:.1e}, {:.1} s",
        systems.len(),
        elapsed.as_secs_f64()
    ))
}

fn truncated_correctness(systems: &[CorpusSystem], truth: &[OracleResult]) -> Outcome {
    let mut rows = 0usize;
    let mut min_slack = f64::INFINITY;
    for (s, o) in systems.iter().zip(truth) {
        for k in 2..=4 {
            let run = Csilp::new(&s.evaluator, &s.reliability)
                .criteria(Criteria::max_level(k))
                .run()
                .map_err(|e| format!("{}: {e}", s.name()))?;
            let want: Vec<SystemState> = o
                .minimal_cut_sets
                .iter()
                .filter(|c| c.level() <= k)
                .cloned()
                .collect();
            ensure(as_set(run.critical.members()) == as_set(&want), || {
                format!("{} k={k}: critical set differs", s.name())
            })?;
            let points = run.ledger.trace.iter().map(|t| (t.lower, t.upper));
            for (lo, hi) in points.chain([(run.bounds.lower, run.bounds.upper)]) {
                rows += 1;
                let slack = (o.lolp_exact - lo).min(hi - o.lolp_exact);
                min_slack = min_slack.min(slack);
                ensure(slack >= -1e-12, || {
                    format!("{} k={k}: [{lo}, {hi}] misses {}", s.name(), o.lolp_exact)
                })?;
            }
        }
    }
    Ok(format!(
        "{} runs, {rows} bound rows, min slack {min_slack:.1e}",
        systems.len() * 3
    ))
}

fn efficiency(systems: &[CorpusSystem], truth: &[OracleResult]) -> Outcome {
    let mut eligible = 0usize;
    let mut strict = 0usize;
    let (mut ours, mut theirs) = (0u64, 0u64);
    for (s, o) in systems.iter().zip(truth) {
        let n = s.components();
        for k in 1..=n {
            let c = Csilp::new(&s.evaluator, &s.reliability)
                .criteria(Criteria::max_level(k))
                .run()
                .map_err(|e| e.to_string())?;
            let se = enumerate_assess(&s.evaluator, &s.reliability, Criteria::max_level(k), 1)
                .map_err(|e| e.to_string())?;
            ensure(c.evaluations <= se.evaluations, || {
                format!("{} k={k}: {} > {}", s.name(), c.evaluations, se.evaluations)
            })?;
            if k == n {
                ours += c.evaluations;
                theirs += se.evaluations;
                if o.minimal_cut_sets.iter().any(|m| m.level() <= 2) {
                    eligible += 1;
                    if c.evaluations < se.evaluations {
                        strict += 1;
                    }
                }
            }
        }
    }
    let share = strict as f64 / eligible.max(1) as f64;
    ensure(share >= 0.9, || {
        format!("strictly fewer on {strict}/{eligible}")
    })?;
    Ok(format!(
        "never more at any k; strictly fewer on {strict}/{eligible} systems with low-level failures; complete runs {ours} vs {theirs} evaluations"
    ))
}

fn random_lattice(rng: &mut ChaCha8Rng) -> (Lattice, ComponentReliability) {
    let n = rng.gen_range(1..=10);
    let mut lo = Vec::new();
    let mut hi = Vec::new();
    for id in 1..=n {
        match rng.gen_range(0..10) {
            0..=1 => {
                lo.push(id);
                hi.push(id);
            }
            2..=7 => hi.push(id),
            _ => {}
        }
    }
    let p: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..=1.0)).collect();
    (lattice(n, &lo, &hi), ComponentReliability::new(p).unwrap())
}

fn check_cells(l: &Lattice, r: &ComponentReliability, p: &PartitionResult) -> Result<(), String> {
    let cells: Vec<&Lattice> = p.cells().collect();
    common::tiles(&cells, l)?;
    let mass: f64 = cells.iter().map(|c| r.lattice_probability(c)).sum();
    let whole = r.lattice_probability(l);
    ensure((mass - whole).abs() <= 1e-12, || {
        format!("{l}: mass {mass} vs {whole}")
    })
}

fn partition_tiling() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x711e);
    let cases = 3000;
    let mut cells = 0usize;
    for _ in 0..cases {
        let (l, r) = random_lattice(&mut rng);
        let d = l.dimension();
        let mut free = l.free_components();
        free.shuffle(&mut rng);
        let order = ColumnOrder::new(&l, free).unwrap();
        if d >= 1 {
            let m = rng.gen_range(1..=d);
            let failing = rng.gen_range(0..=m);
            let p = partition_by_level1(&l, &order, m, failing).map_err(|e| e.to_string())?;
            check_cells(&l, &r, &p)?;
            cells += p.cell_count();
        }
        let density = rng.gen_range(0.0..0.6);
        let pairs: Vec<SystemState> = l
            .members(2)
            .unwrap_or_default()
            .into_iter()
            .filter(|_| rng.gen_bool(density))
            .collect();
        for ord in [choose_order(&l, &pairs), order.clone()] {
            let p = partition_by_level2(&l, &ord, &pairs).map_err(|e| e.to_string())?;
            check_cells(&l, &r, &p)?;
            cells += p.cell_count();
            for f in &p.failure_lattices {
                ensure(pairs.contains(f.lower()), || {
                    format!("failure cell {f} has no failing minimum")
                })?;
            }
            for c in p.normal_lattices.iter().chain(&p.one_normal_lattices) {
                ensure(!pairs.iter().any(|s| c.contains(s)), || {
                    format!("{c} holds a failure pair")
                })?;
            }
        }
    }
    Ok(format!(
        "{cases} random lattices (n <= 10), {cells} cells checked"
    ))
}

fn dcopf_suite() -> Outcome {
    let sys = bundled("test3").unwrap();
    let Model::DcOpf(ev) = &sys.model else {
        return Err("test3 is not a network".into());
    };
    let net = ev.network();
    let mut worst = 0.0f64;
    for (ids, want) in [(vec![], 0.0), (vec![2], 40.0), (vec![1], 100.0)] {
        let s = state(4, &ids);
        let shed = min_load_shed(net, &s).map_err(|e| e.to_string())?;
        ensure((shed - want).abs() <= 1e-9, || {
            format!("{}: shed {shed}, want {want}", sys.describe(&s))
        })?;
        let lp = build_shed_lp(&apply_state(net, &s).unwrap());
        let sol = lp
            .solve()
            .map_err(|e| e.to_string())?
            .optimal()
            .ok_or("not optimal")?;
        let res = lp.residual(&sol.x);
        worst = worst.max(res);
        ensure(res <= 1e-8, || format!("residual {res:e}"))?;
    }
    Ok(format!("sheds 0 / 40 / 100 MW, max residual {worst:.1e}"))
}

fn mcs_sanity() -> Outcome {
    let sys = bundled("sys5").unwrap();
    let exact = 0.11791;
    let mut inside = 0;
    for seed in 0..50 {
        let settings = McsSettings {
            seed,
            target_cov: Some(0.01),
            ..Default::default()
        };
        let run = monte_carlo_assess(sys.evaluator(), &sys.reliability, settings, 1)
            .map_err(|e| e.to_string())?;
        let sigma = (exact * (1.0 - exact) / run.samples as f64).sqrt();
        if (run.estimate - exact).abs() <= 3.0 * sigma {
            inside += 1;
        }
    }
    ensure(inside >= 47, || format!("{inside}/50 within 3 sigma"))?;
    Ok(format!("{inside}/50 estimates within 3 sigma of {exact}"))
}

fn rbts_reference() -> Outcome {
    let reference_lolp = 0.009475169361176;
    let reference_counts = [1usize, 19, 15, 10, 17];
    let sys = bundled("rbts").unwrap();
    let t0 = Instant::now();
    let run = Csilp::new(sys.evaluator(), &sys.reliability)
        .criteria(Criteria::complete())
        .workers(4)
        .run()
        .map_err(|e| e.to_string())?;
    let rel = (run.lolp() - reference_lolp).abs() / reference_lolp;
    let counts = run.critical.level_counts();
    let detail = format!(
        "LOLP {:.10}% (rel. error {rel:.1e}), counts {counts:?}, {} evaluations, {:.1} s",
        run.lolp() * 100.0,
        run.evaluations,
        t0.elapsed().as_secs_f64()
    );
    let counts_ok = counts.len() == reference_counts.len()
        && counts
            .iter()
            .zip(reference_counts)
            .all(|(&a, b)| a.abs_diff(b) <= 2);
    ensure(rel <= 0.05 && counts_ok, || detail.clone())?;
    Ok(detail)
}

fn determinism() -> Outcome {
    let commands: &[&[&str]] = &[
        &["assess", "--system", "sys5", "--k-max", "5"],
        &["assess", "--system", "threshold12"],
        &[
            "assess",
            "--system",
            "rbts",
            "--k-max",
            "2",
            "--tight-upper",
        ],
        &["enumerate", "--system", "threshold10", "--k-max", "4"],
        &["mcs", "--system", "sys5", "--seed", "7", "--cov", "0.01"],
        &["oracle", "--system", "threshold8"],
    ];
    let mut compared = 0;
    for cmd in commands {
        for format in ["json", "csv"] {
            let mut reference: Option<Vec<(String, Vec<u8>)>> = None;
            for workers in ["1", "4", "1", "4"] {
                let dir = tempfile::tempdir().unwrap();
                let mut args = cmd.to_vec();
                args.extend(["--workers", workers, "--format", format]);
                let out = common::latrel_in(dir.path(), &args);
                ensure(out.status.success(), || {
                    format!("{cmd:?} exited {:?}", out.status)
                })?;
                let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir.path())
                    .unwrap()
                    .map(|e| {
                        let e = e.unwrap();
                        (
                            e.file_name().to_string_lossy().into_owned(),
                            fs::read(e.path()).unwrap(),
                        )
                    })
                    .collect();
                files.sort();
                match &reference {
                    None => reference = Some(files),
                    Some(r) => {
                        ensure(*r == files, || {
                            format!("{cmd:?} --format {format} --workers {workers} differs")
                        })?;
                        compared += 1;
                    }
                }
            }
        }
    }
    Ok(format!(
        "{} commands x 2 formats, {compared} replays byte-identical",
        commands.len()
    ))
}

fn main() {
    let systems = corpus(CORPUS_SIZE);
    let truth = oracles(&systems);
    let criteria: Vec<(usize, &str, Check)> = vec![
        (1, "worked example", Box::new(worked_example)),
        (
            2,
            "oracle equivalence",
            Box::new(|| oracle_equivalence(&systems, &truth)),
        ),
        (
            3,
            "truncated correctness",
            Box::new(|| truncated_correctness(&systems, &truth)),
        ),
        (
            4,
            "efficiency dominance",
            Box::new(|| efficiency(&systems, &truth)),
        ),
        (5, "partition tiling", Box::new(partition_tiling)),
        (6, "dc-opf unit suite", Box::new(dcopf_suite)),
        (7, "mcs statistical sanity", Box::new(mcs_sanity)),
        (
            8,
            "six-bus reference figures (stretch)",
            Box::new(rbts_reference),
        ),
        (9, "determinism", Box::new(determinism)),
    ];
    let mut required_failures = 0;
    for (id, name, check) in &criteria {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match outcome {
            Ok(detail) => println!("criterion {id}: PASS  {name}: {detail}"),
            Err(detail) => {
                let tag = if STRETCH.contains(id) {
                    "FAIL (not enforced)"
                } else {
                    "FAIL"
                };
                println!("criterion {id}: {tag}  {name}: {detail}");
                if !STRETCH.contains(id) {
                    required_failures += 1;
                }
            }
        }
    }
    if required_failures > 0 {
        eprintln!("{required_failures} acceptance criteria failed");
        std::process::exit(1);
    }
}
