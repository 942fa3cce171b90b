fn main() {
    std::process::exit(codemodal::cli::main_entry());
}
