fn main() {
    std::process::exit(qvf_shrink::harness::run_cli(std::env::args_os()));
}
