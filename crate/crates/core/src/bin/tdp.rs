fn main() -> std::process::ExitCode {
    tdp_core::cli::main()
}
