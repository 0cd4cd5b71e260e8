fn main() -> std::process::ExitCode {
    dhocbf::cli::main_with_args(std::env::args_os())
}
