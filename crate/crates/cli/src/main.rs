use std::process::ExitCode;

fn main() -> ExitCode {
    match snspd_lab::run(std::env::args_os().skip(1)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            if let Some(clap_err) = err.downcast_ref::<clap::Error>() {
                let _ = clap_err.print();
                if !clap_err.use_stderr() {
                    // --help and --version
                    return ExitCode::SUCCESS;
                }
            } else {
                eprintln!("error: {err:#}");
            }
            ExitCode::from(snspd_lab::exit_code(&err))
        }
    }
}
