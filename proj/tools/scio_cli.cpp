// SPDX-License-Identifier: Apache-2.0
#include "scio/cli.hpp"

int main(int argc, char** argv) { return scio::run_cli(argc, argv); }
