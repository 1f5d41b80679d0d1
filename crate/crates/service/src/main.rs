fn main() -> std::process::ExitCode {
    swimset_service::cli::main()
}
