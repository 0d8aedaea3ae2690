use std::io;
use std::process::ExitCode;

fn main() -> ExitCode {
    let env = match imgvc_cli::Env::from_process() {
        Ok(env) => env,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.class());
            return ExitCode::from(1);
        }
    };
    let code = imgvc_cli::run(std::env::args_os(), &env, &mut io::stdout(), &mut io::stderr());
    ExitCode::from(code as u8)
}
