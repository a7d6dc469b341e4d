fn main() {
    std::process::exit(killed_chains::cli::main_entry());
}
