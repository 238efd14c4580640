use std::process::ExitCode;

fn main() -> ExitCode {
    match xclust::cli::run_from(std::env::args_os()) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => match e.downcast_ref::<clap::Error>() {
            Some(ce) => {
                let _ = ce.print();
                ExitCode::from(if ce.use_stderr() { 2 } else { 0 })
            }
            None => {
                eprintln!("error: {e:#}");
                ExitCode::FAILURE
            }
        },
    }
}
