fn main() {
    std::process::exit(trunc_cpe::cli::dispatch(std::env::args_os()));
}
