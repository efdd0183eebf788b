fn main() {
    std::process::exit(nonlocal_flow::cli::main(std::env::args_os()));
}
