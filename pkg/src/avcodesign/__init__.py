"""Monotone co-design of vehicle control stacks.

Library layout:

* ``order``       -- partial orders, antichains, upper sets, Pareto filtering
* ``mdpi``        -- monotone design-problem interfaces and their algebra
* ``diagram``     -- interconnection diagrams and the query solver
* ``vehicle``     -- kinematic single-track plant with noise and actuation limits
* ``ekf``         -- extended Kalman filter with intermittent observations
* ``paths``       -- reference path construction and sampling
* ``controllers`` -- tracking error and the five control laws
* ``simulate``    -- closed-loop runs and Monte-Carlo aggregation
* ``catalog``     -- sensor/computer catalogs and compute-cost calibration
* ``designspace`` -- parameter grids, empirical relations, controller MDPIs
* ``assemble``    -- the full vehicle-control co-design diagram
* ``report``      -- delimited exports, plot data, and rendered figures
* ``cli``         -- batch command line interface
"""

__version__ = "0.1.0"
