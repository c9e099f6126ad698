fn main() -> std::process::ExitCode {
    flowtruth::cli::main_with_args(std::env::args_os())
}
