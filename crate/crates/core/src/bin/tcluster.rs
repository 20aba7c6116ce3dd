fn main() {
    std::process::exit(tensor_cluster::cli::run_cli(std::env::args_os()));
}
