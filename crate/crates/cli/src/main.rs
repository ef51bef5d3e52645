use std::io;

fn main() {
    let code = multcover_cli::dispatch(std::env::args().skip(1), &mut io::stdout(), &mut io::stderr());
    std::process::exit(code);
}
