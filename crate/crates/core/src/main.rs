use std::process::ExitCode;

fn main() -> ExitCode {
    // cap worker parallelism (including the BLAS pool) before any numerical
    // call touches the library
    if let Ok(threads) = std::env::var("HEXHADRON_THREADS") {
        std::env::set_var("OPENBLAS_NUM_THREADS", &threads);
        std::env::set_var("OMP_NUM_THREADS", &threads);
    }
    ExitCode::from(hexhadron::cli::run(std::env::args()) as u8)
}
