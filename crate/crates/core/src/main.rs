fn main() {
    std::process::exit(rvfl_cil::cli::run_from(std::env::args_os()));
}
