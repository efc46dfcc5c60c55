fn main() -> std::process::ExitCode {
    sketchedit::cli::main()
}
