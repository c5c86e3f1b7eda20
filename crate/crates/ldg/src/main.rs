fn main() {
    std::process::exit(ldg::cli::main());
}
