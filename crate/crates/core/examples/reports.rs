// Saving and reloading run reports.
//
// Reports are JSON (schema_version 1) with plain probabilities; the bound
// trace and the critical-state table can also be written as CSV.

use lattice_reliability::{bundled, Criteria, Csilp, OutputFormat, Report};

fn main() {
    let sys = bundled("sys5").unwrap();
    let criteria = Criteria::max_level(3);
    let run = Csilp::new(sys.evaluator(), &sys.reliability)
        .criteria(criteria)
        .run()
        .unwrap();
    let report = Report::from_csilp(&sys, &run, criteria, false, None);

    let dir = std::env::temp_dir().join(format!("latrel-reports-{}", std::process::id()));
    let mut files = report.write_to(&dir, OutputFormat::Json).unwrap();
    files.extend(report.write_to(&dir, OutputFormat::Csv).unwrap());
    for f in &files {
        println!("wrote {}", f.display());
    }

    let back = Report::load(dir.join("report.json")).unwrap();
    assert_eq!(back, report);
    print!("\n{}", back.render());
    println!(
        "\ntrace.csv:\n{}",
        std::fs::read_to_string(dir.join("trace.csv")).unwrap()
    );
    std::fs::remove_dir_all(&dir).unwrap();
}
