fn main() {
    std::process::exit(lfg_core::cli::dispatch(std::env::args_os()));
}
