fn main() {
    std::process::exit(qvi_fem::cli::main_with_args(std::env::args_os()));
}
