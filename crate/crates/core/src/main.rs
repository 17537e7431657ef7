fn main() {
    std::process::exit(biphoton_qudit_sim::cli::main());
}
