fn main() -> std::process::ExitCode {
    ontogram_cli::cli::main()
}
