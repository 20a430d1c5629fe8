//! Times the momentum kernel on square blocks of growing size and fits
//! the linear cost model to the samples.

use nested_swe::balance::{benchmark_momentum, fit_cost_model, samples_to_csv};

fn main() {
    let samples = benchmark_momentum(&[50, 100, 150, 200, 250, 300], 5, 1);
    print!("{}", samples_to_csv(&samples));
    let model = fit_cost_model(&samples).expect("distinct block sizes");
    println!(
        "slope {:.4e} us/cell  intercept {:.2} us  r^2 {:.4}",
        model.slope, model.intercept, model.r_squared
    );
    println!(
        "predicted cost of a 1000x1000 block: {:.1} ms",
        model.block_cost(1_000_000) / 1e3
    );
}
