fn main() {
    std::process::exit(asif_rta::cli::dispatch(std::env::args_os()));
}
