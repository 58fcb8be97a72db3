fn main() {
    std::process::exit(specx::cli_runner::main_entry());
}
