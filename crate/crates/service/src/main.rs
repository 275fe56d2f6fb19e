fn main() -> std::process::ExitCode {
    tacticforge::cli::main()
}
