fn main() {
    std::process::exit(erpqk::cli::main());
}
