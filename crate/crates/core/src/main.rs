fn main() {
    std::process::exit(compmr::cli::main());
}
