#!/usr/bin/env python3

from setuptools import setup

__version__ = '0.1.1'

setup(name='visidata-plate',
      version=__version__,
      install_requires=['visidata>=2.11,<3', 'numpy', 'scipy>=1.12', 'pyyaml', 'psutil'],
      extras_require={'test': ['pytest']},
      description='damped clamped-plate wave lab with VisiData result sheets',
      long_description=open('README.md').read(),
      long_description_content_type='text/markdown',
      packages=['vdplate'],
      entry_points={'console_scripts': ['vdplate=vdplate.cli:main']},
      python_requires='>=3.9',
      classifiers=[
          'Development Status :: 3 - Alpha',
          'Environment :: Console',
          'Intended Audience :: Science/Research',
          'Operating System :: OS Independent',
          'Programming Language :: Python :: 3',
          'Topic :: Scientific/Engineering :: Mathematics',
      ],
      keywords=('console visidata plate biharmonic observability inverse-problem'),
      )
