#ifndef PCI_PCI_HPP
#define PCI_PCI_HPP

#include "pci/checkpoint.hpp"
#include "pci/data_model.hpp"
#include "pci/feature_store.hpp"
#include "pci/features.hpp"
#include "pci/manifest.hpp"
#include "pci/metrics.hpp"
#include "pci/model.hpp"
#include "pci/optim.hpp"
#include "pci/rnn.hpp"

#endif  // PCI_PCI_HPP
