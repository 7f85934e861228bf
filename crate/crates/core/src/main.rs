fn main() -> std::process::ExitCode {
    catecho::cli::main()
}
