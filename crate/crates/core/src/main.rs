fn main() -> std::process::ExitCode {
    qunion::cli::run(std::env::args_os())
}
