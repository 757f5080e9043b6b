// Copies its second-to-last argument to its last argument. Used as a loopback
// external processor.
#include <filesystem>
#include <iostream>

int main(int argc, char** argv) {
  if (argc < 3) {
    std::cerr << "usage: sglc_copy_stub [args...] <input> <output>\n";
    return 2;
  }
  std::error_code ec;
  std::filesystem::copy_file(argv[argc - 2], argv[argc - 1], std::filesystem::copy_options::overwrite_existing, ec);
  if (ec) {
    std::cerr << "sglc_copy_stub: " << ec.message() << '\n';
    return 1;
  }
  return 0;
}
