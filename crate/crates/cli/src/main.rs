fn main() {
    std::process::exit(scentag_cli::main_with_io());
}
