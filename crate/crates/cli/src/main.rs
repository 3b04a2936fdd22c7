fn main() {
    std::process::exit(phasemem_cli::dispatch(std::env::args_os()));
}
