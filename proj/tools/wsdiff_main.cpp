#include "wsdiff/runner.hpp"

int main(int argc, char** argv) { return wsdiff::run_main(argc, argv); }
