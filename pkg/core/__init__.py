# Core package: datasets, model, metrics, the FairBatch sampler and the theory lab.
