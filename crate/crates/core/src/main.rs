fn main() -> std::process::ExitCode {
    odegcn::cli::main_entry()
}
