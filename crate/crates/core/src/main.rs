fn main() -> std::process::ExitCode {
    flowssm::cli::main()
}
