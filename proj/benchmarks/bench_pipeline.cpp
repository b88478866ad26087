// Microbenchmarks for the stages that sit on the 50 Hz acquisition path
// (synthesis, demodulation, operator apply) plus the offline setup costs
// (assembly, factorization updates, Jacobian, operator build).

#include <random>

#include <benchmark/benchmark.h>

#include <eitsense/fdm.hpp>
#include <eitsense/fem.hpp>
#include <eitsense/inverse.hpp>
#include <eitsense/jacobian.hpp>
#include <eitsense/mesh.hpp>
#include <eitsense/protocol.hpp>

using namespace eitsense;

namespace {

// Coarse variant of the shipped actuator so per-iteration setup stays cheap
// enough for repeated timing; the default resolution is benchmarked once
// below via BM_AssembleAndFactorizeFull.
Mesh coarse_hinged() {
    HingedActuatorParams params;
    params.target_edge_length = 5.0;
    return generate_hinged_actuator_mesh(params);
}

Eigen::MatrixXd random_jacobian(int rows, int cols) {
    std::mt19937_64 rng(99);
    std::normal_distribution<double> gauss;
    Eigen::MatrixXd J(rows, cols);
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) J(i, j) = gauss(rng);
    return J;
}

}  // namespace

static void BM_AssembleAndFactorizeCoarse(benchmark::State& state) {
    Mesh mesh = coarse_hinged();
    Conductivity sigma(mesh, 0.2);
    for (auto _ : state) {
        CemSystem system(mesh, sigma);
        benchmark::DoNotOptimize(system.reduced_matrix());
    }
    state.SetLabel(std::to_string(mesh.element_count()) + " elements");
}
BENCHMARK(BM_AssembleAndFactorizeCoarse)->Unit(benchmark::kMillisecond);

static void BM_AssembleAndFactorizeFull(benchmark::State& state) {
    Mesh mesh = generate_hinged_actuator_mesh();
    Conductivity sigma(mesh, 0.2);
    for (auto _ : state) {
        CemSystem system(mesh, sigma);
        benchmark::DoNotOptimize(system.reduced_matrix());
    }
    state.SetLabel(std::to_string(mesh.element_count()) + " elements");
}
BENCHMARK(BM_AssembleAndFactorizeFull)->Unit(benchmark::kMillisecond)->Iterations(3);

// Cost of one sweep state on the full mesh: re-stamp the changed elements,
// refactorize, and solve the three-injection protocol cold.
static void BM_UpdateAndForwardFull(benchmark::State& state) {
    Mesh mesh = generate_hinged_actuator_mesh();
    Conductivity sigma(mesh, 0.2);
    CemSystem system(mesh, sigma);
    Protocol protocol = make_hinged_protocol();
    Conductivity bumped = sigma;
    bumped[0] = 0.25;
    bool flip = false;
    for (auto _ : state) {
        system.update_conductivity(flip ? sigma : bumped);
        flip = !flip;
        benchmark::DoNotOptimize(system.forward(protocol).measurements);
    }
}
BENCHMARK(BM_UpdateAndForwardFull)->Unit(benchmark::kMillisecond)->Iterations(4);

static void BM_UpdateConductivity(benchmark::State& state) {
    Mesh mesh = coarse_hinged();
    Conductivity sigma(mesh, 0.2);
    CemSystem system(mesh, sigma);
    Conductivity bumped = sigma;
    bumped[0] = 0.25;
    bool flip = false;
    for (auto _ : state) {
        system.update_conductivity(flip ? sigma : bumped);
        flip = !flip;
    }
    state.SetLabel(std::to_string(mesh.element_count()) + " elements");
}
BENCHMARK(BM_UpdateConductivity)->Unit(benchmark::kMillisecond);

static void BM_Jacobian(benchmark::State& state) {
    Mesh mesh = coarse_hinged();
    CemSystem system(mesh, Conductivity(mesh, 0.2));
    Protocol protocol = make_hinged_protocol();
    for (auto _ : state) {
        benchmark::DoNotOptimize(compute_jacobian(system, protocol));
    }
    state.SetLabel("9 x " + std::to_string(mesh.element_count()));
}
BENCHMARK(BM_Jacobian)->Unit(benchmark::kMillisecond);

static void BM_SynthesizeFrame(benchmark::State& state) {
    Protocol protocol = make_hinged_protocol();
    Eigen::VectorXd amplitudes = Eigen::VectorXd::Constant(9, 0.05);
    NoiseModel noise;
    noise.std_volts = 1e-4;
    std::uint64_t seed = 1;
    for (auto _ : state) {
        benchmark::DoNotOptimize(
            synthesize_frame(protocol, amplitudes, 50e3, 20e-3, noise, seed++));
    }
}
BENCHMARK(BM_SynthesizeFrame)->Unit(benchmark::kMicrosecond);

static void BM_DemodulateFrame(benchmark::State& state) {
    Protocol protocol = make_hinged_protocol();
    Eigen::VectorXd amplitudes = Eigen::VectorXd::Constant(9, 0.05);
    NoiseModel noise;
    noise.std_volts = 1e-4;
    TimeSeries frame = synthesize_frame(protocol, amplitudes, 50e3, 20e-3, noise, 1);
    for (auto _ : state) {
        benchmark::DoNotOptimize(demodulate_frame(frame, protocol));
    }
}
BENCHMARK(BM_DemodulateFrame)->Unit(benchmark::kMicrosecond);

static void BM_OperatorBuild(benchmark::State& state) {
    Eigen::MatrixXd J = random_jacobian(9, static_cast<int>(state.range(0)));
    for (auto _ : state) {
        benchmark::DoNotOptimize(ReconstructionOperator::build(J, 1e-3));
    }
}
BENCHMARK(BM_OperatorBuild)->Arg(1000)->Arg(5000)->Unit(benchmark::kMicrosecond);

static void BM_OperatorApply(benchmark::State& state) {
    Eigen::MatrixXd J = random_jacobian(9, static_cast<int>(state.range(0)));
    ReconstructionOperator op = ReconstructionOperator::build(J, 1e-3);
    Eigen::VectorXd dv = Eigen::VectorXd::LinSpaced(9, -1e-3, 1e-3);
    for (auto _ : state) {
        benchmark::DoNotOptimize(op.apply(dv));
    }
}
BENCHMARK(BM_OperatorApply)->Arg(1000)->Arg(5000)->Unit(benchmark::kMicrosecond);

BENCHMARK_MAIN();
