#include <iostream>
#include <string>
#include <vector>

#include "patchmg/harness.hpp"

#ifdef PATCHMG_WITH_MPI
#include <mpi.h>
#endif

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
#ifdef PATCHMG_WITH_MPI
  bool want_mpi = false;
  for (std::size_t i = 0; i < args.size(); ++i)
    if (args[i] == "--backend=mpi" ||
        (args[i] == "--backend" && i + 1 < args.size() && args[i + 1] == "mpi"))
      want_mpi = true;
  if (want_mpi) MPI_Init(&argc, &argv);
  const int code = patchmg::run_cli(args, std::cout, std::cerr);
  if (want_mpi) MPI_Finalize();
  return code;
#else
  return patchmg::run_cli(args, std::cout, std::cerr);
#endif
}
