fn main() {
    std::process::exit(lattice_reliability::cli::main());
}
