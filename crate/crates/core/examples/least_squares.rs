//! Levenberg–Marquardt on the Rosenbrock residuals and on an exponential
//! curve fit with an analytic Jacobian.

use nalgebra::DMatrix;

use multiquery::models::{register_function_model, FunctionModel};
use multiquery::optimize::{levenberg_marquardt, JacobianSource, LmSettings};

fn main() -> multiquery::Result<()> {
    let rosen = register_function_model("rosenbrock_residuals", Some(2))?;
    let r = levenberg_marquardt(&rosen, &[-1.2, 1.0], &LmSettings::default())?;
    println!(
        "rosenbrock: x {:?}, objective {:.2e}, {} iterations, {:?}",
        r.x, r.objective, r.iterations, r.termination
    );

    // y = a·exp(-k·t) sampled without noise at a = 2, k = 1.5
    let t: Vec<f64> = (0..12).map(|i| i as f64 * 0.25).collect();
    let data: Vec<f64> = t.iter().map(|t| 2.0 * (-1.5 * t).exp()).collect();
    let (tr, dr) = (t.clone(), data.clone());
    let tj = t.clone();
    let decay = FunctionModel::new("decay", 2, t.len(), move |x| {
        tr.iter().zip(&dr).map(|(t, y)| x[0] * (-x[1] * t).exp() - y).collect()
    })
    .with_jacobian(move |x| {
        // d × m layout: one row per parameter
        DMatrix::from_fn(2, tj.len(), |i, j| {
            let e = (-x[1] * tj[j]).exp();
            if i == 0 { e } else { -x[0] * tj[j] * e }
        })
    });
    let settings = LmSettings {
        jacobian: JacobianSource::Analytic,
        ..LmSettings::default()
    };
    let r = levenberg_marquardt(&decay, &[1.0, 0.5], &settings)?;
    println!("decay fit: a {:.6}, k {:.6} after {} iterations", r.x[0], r.x[1], r.iterations);
    for p in r.trace.iter().take(6) {
        println!("  objective {:.3e}", p.objective);
    }
    Ok(())
}
