//! A 2-D grid study over a model that fails in one corner of the domain.
//! Failed points keep their rows, carry NaN outputs and are counted.

use multiquery::designs::grid_design;
use multiquery::models::{FunctionModel, JobStatus, Model};
use multiquery::parameters::{build_space, Distribution};

fn main() -> multiquery::Result<()> {
    let space = build_space([
        ("a", Distribution::uniform(0.0, 1.0)),
        ("b", Distribution::uniform(0.0, 1.0)),
    ])?;
    let model = FunctionModel::fallible("corner", 2, 1, |x| {
        if x[0] >= 0.7 && x[1] >= 0.7 {
            Err("solver diverged".into())
        } else {
            Ok(vec![x[0] + x[1]])
        }
    });
    let design = grid_design(&space, &[6, 6])?;
    let batch = model.evaluate(&design)?;

    for i in (0..6).rev() {
        let line: Vec<String> = (0..6)
            .map(|j| {
                let k = j * 6 + i;
                match batch.statuses[k] {
                    JobStatus::Completed => format!("{:5.2}", batch.outputs[k][0]),
                    _ => "    x".to_string(),
                }
            })
            .collect();
        println!("{}", line.join(" "));
    }
    println!("{} of {} points failed", batch.failure_count(), batch.len());
    Ok(())
}
